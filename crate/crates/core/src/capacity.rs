//! LP discretizations of positive capacities: maximize `μ(E)` over atoms
//! `μ = Σ w_i δ_{a_i}`, `w ≥ 0`, under cube growth caps and potential
//! bounds on a finite grid of evaluation points.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::CantorSpec;
use crate::error::{CapacityError, GeoError, KernelError};
use crate::kernels::{Kernel, KernelFamily, KernelSpec};
use crate::lp::{solve_lp_lazy, LpInstance, LpSolution, SimplexOptions};
use crate::measures::DiscreteMeasure;
use crate::potentials::{bmo_oscillation, BmoEstimate};
use crate::psgeo::{bounding_cube, hausdorff_content_upper_in, ps_dist_raw, validate_s, CellKey, DyadicGrid, PsCube, PsPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityProblem {
    pub candidate_atoms: Vec<PsPoint>,
    /// Each contributes `Σ_{a_i ∈ Q} w_i ≤ diam(Q)^{growth_exponent}`.
    pub growth_cubes: Vec<PsCube>,
    pub growth_exponent: f64,
    pub eval_points: Vec<PsPoint>,
    pub kernel: KernelSpec,
    pub enforce_conjugate: bool,
    pub bound: f64,
    /// Minimum ps-distance between eval points and atoms.
    pub margin: f64,
}

impl CapacityProblem {
    pub fn new(candidate_atoms: Vec<PsPoint>, kernel: KernelSpec) -> Self {
        Self {
            growth_exponent: kernel.n as f64 + 1.0,
            candidate_atoms,
            growth_cubes: Vec::new(),
            eval_points: Vec::new(),
            kernel,
            enforce_conjugate: false,
            bound: 1.0,
            margin: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.kernel.n
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        self.kernel.validate()?;
        let n = self.n();
        if self.candidate_atoms.is_empty() {
            return Err(CapacityError::InvalidParameter("no candidate atoms".into()));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(CapacityError::InvalidParameter(format!("bound must be positive, got {}", self.bound)));
        }
        if !(self.growth_exponent > 0.0) {
            return Err(CapacityError::InvalidParameter("growth exponent must be positive".into()));
        }
        for p in self.candidate_atoms.iter().chain(&self.eval_points) {
            if p.n() != n {
                return Err(GeoError::DimensionMismatch { expected: n, found: p.n() }.into());
            }
            if !p.is_finite() {
                return Err(CapacityError::InvalidParameter("non-finite point".into()));
            }
        }
        for q in &self.growth_cubes {
            if q.n() != n {
                return Err(GeoError::DimensionMismatch { expected: n, found: q.n() }.into());
            }
        }
        let s = self.kernel.s;
        for (i, e) in self.eval_points.iter().enumerate() {
            for (j, a) in self.candidate_atoms.iter().enumerate() {
                let d = ps_dist_raw(&e.x, e.t, &a.x, a.t, s);
                if d < self.margin || d == 0.0 {
                    return Err(CapacityError::InvalidParameter(format!("eval point {i} is within {d} of atom {j}")));
                }
            }
        }
        Ok(())
    }

    /// Potential rows per eval point.
    pub fn rows_per_eval(&self) -> usize {
        2 * self.kernel.components() * if self.enforce_conjugate { 2 } else { 1 }
    }
}

/// Row layout: growth cubes in order, then per eval point the `±` rows of
/// each kernel component, then the same for the conjugate kernel.
pub fn build_lp(p: &CapacityProblem) -> Result<LpInstance, CapacityError> {
    p.validate()?;
    let cols = p.candidate_atoms.len();
    let mut lp = LpInstance::with_unit_objective(cols)?;
    let mut row = vec![0.0; cols];
    for q in &p.growth_cubes {
        for (r, a) in row.iter_mut().zip(&p.candidate_atoms) {
            *r = if q.contains(a) { 1.0 } else { 0.0 };
        }
        lp.add_row(&row, q.diam().powf(p.growth_exponent))?;
    }
    let kernel = Kernel::build(&p.kernel)?;
    let comps = kernel.components();
    let directions: &[f64] = if p.enforce_conjugate { &[1.0, -1.0] } else { &[1.0] };
    let blocks: Vec<Vec<Vec<f64>>> = p
        .eval_points
        .par_iter()
        .enumerate()
        .map(|(pi, e)| {
            let mut out = vec![vec![0.0; cols]; comps * directions.len()];
            let mut dx = vec![0.0; p.n()];
            let mut val = vec![0.0; comps];
            for (ai, a) in p.candidate_atoms.iter().enumerate() {
                for (di, sign) in directions.iter().enumerate() {
                    for k in 0..dx.len() {
                        dx[k] = sign * (e.x[k] - a.x[k]);
                    }
                    kernel.eval_into(&dx, sign * (e.t - a.t), &mut val).map_err(|source: KernelError| CapacityError::AtomKernel { point: pi, atom: ai, source })?;
                    for c in 0..comps {
                        out[di * comps + c][ai] = val[c];
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_, CapacityError>>()?;
    for block in blocks {
        for coeffs in block {
            lp.add_row(&coeffs, p.bound)?;
            let neg: Vec<f64> = coeffs.iter().map(|v| -v).collect();
            lp.add_row(&neg, p.bound)?;
        }
    }
    Ok(lp)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub optimal_weights: Vec<f64>,
    pub active_constraints: Vec<usize>,
    pub atoms: usize,
    pub cubes: usize,
    pub evals: usize,
    pub rows: usize,
    pub iterations: usize,
    pub primal_residual: f64,
    pub duality_gap: f64,
}

impl CapacityEstimate {
    pub fn from_solution(p: &CapacityProblem, lp: &LpInstance, sol: LpSolution) -> Self {
        Self {
            value: sol.value,
            optimal_weights: sol.weights,
            active_constraints: sol.active_rows,
            atoms: p.candidate_atoms.len(),
            cubes: p.growth_cubes.len(),
            evals: p.eval_points.len(),
            rows: lp.rows(),
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
        }
    }

    /// The optimal measure on the problem's atoms.
    pub fn measure(&self, p: &CapacityProblem) -> Result<DiscreteMeasure, CapacityError> {
        DiscreteMeasure::from_atoms(&p.candidate_atoms, self.optimal_weights.clone(), p.n(), p.kernel.s).map_err(|e| CapacityError::InvalidParameter(e.to_string()))
    }
}

pub const DEFAULT_LP_TOL: f64 = 1e-9;

/// Solved by row generation seeded with the growth rows; the result is the
/// optimum of the full program.
pub fn solve_capacity(p: &CapacityProblem, tol: f64) -> Result<CapacityEstimate, CapacityError> {
    let lp = build_lp(p)?;
    let growth: Vec<usize> = (0..p.growth_cubes.len()).collect();
    let sol = solve_lp_lazy(&lp, &growth, &SimplexOptions { tol, ..SimplexOptions::default() })?;
    Ok(CapacityEstimate::from_solution(p, &lp, sol))
}

/// How a point set is turned into a [`CapacityProblem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Growth cubes are the occupied dyadic cubes of `root` at levels
    /// `0..=level`.
    pub level: u32,
    /// Defaults to the bounding cube of the atoms.
    pub root: Option<PsCube>,
    /// Keep only the first atom of each occupied level-`level` cube.
    pub merge_atoms: bool,
    /// Eval points are lattice points with spacing `h` (time `h^{2s}`),
    /// `h` half the finest cube side, at ps-distance from the atoms in
    /// `[band.0 · h, band.1 · h]`.
    pub band: (f64, f64),
    /// Keep every `k`-th eval point in lattice order when there are more.
    pub max_eval_points: Option<usize>,
    pub bound: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { level: 3, root: None, merge_atoms: false, band: (1.0, 4.0), max_eval_points: None, bound: 1.0 }
    }
}

impl Resolution {
    pub fn at_level(level: u32) -> Self {
        Self { level, ..Self::default() }
    }
}

/// Assembles the problem for `atoms` with the given kernel.
pub fn assemble(atoms: &[PsPoint], kernel: KernelSpec, enforce_conjugate: bool, res: &Resolution) -> Result<CapacityProblem, CapacityError> {
    kernel.validate()?;
    let s = kernel.s;
    let n = kernel.n;
    if atoms.is_empty() {
        return Err(CapacityError::InvalidParameter("no atoms".into()));
    }
    if !(res.band.0 > 0.0 && res.band.1 >= res.band.0) {
        return Err(CapacityError::InvalidParameter("eval band must satisfy 0 < lo <= hi".into()));
    }
    let root = match &res.root {
        Some(r) => r.clone(),
        None => bounding_cube(atoms, s)?,
    };
    let finest = DyadicGrid::new(&root, res.level)?;
    let mut candidates = Vec::new();
    let mut seen: BTreeSet<CellKey> = BTreeSet::new();
    for (i, a) in atoms.iter().enumerate() {
        let key = finest.cell_of(&a.x, a.t).ok_or_else(|| CapacityError::InvalidParameter(format!("atom {i} lies outside the root cube")))?;
        if !res.merge_atoms || seen.insert(key) {
            candidates.push(a.clone());
        }
    }
    let mut growth_cubes = Vec::new();
    for level in 0..=res.level {
        let grid = DyadicGrid::new(&root, level)?;
        let keys: BTreeSet<CellKey> = candidates.iter().filter_map(|a| grid.cell_of(&a.x, a.t)).collect();
        growth_cubes.extend(keys.into_iter().map(|k| grid.cube(k)));
    }
    let h = 0.5 * finest.side();
    let eval_points = eval_lattice(&candidates, &root.corner, h, s, res)?;
    let mut p = CapacityProblem::new(candidates, kernel);
    p.growth_cubes = growth_cubes;
    p.eval_points = eval_points;
    p.enforce_conjugate = enforce_conjugate;
    p.bound = res.bound;
    p.margin = res.band.0 * h * (1.0 - 1e-12);
    debug_assert_eq!(p.n(), n);
    Ok(p)
}

fn eval_lattice(atoms: &[PsPoint], anchor: &PsPoint, h: f64, s: f64, res: &Resolution) -> Result<Vec<PsPoint>, CapacityError> {
    let n = anchor.n();
    let ht = h.powf(2.0 * s);
    let (lo, hi) = (res.band.0 * h, res.band.1 * h);
    let reach_x = res.band.1.ceil() as i64;
    let reach_t = res.band.1.powf(2.0 * s).ceil() as i64;
    let cell = |p: &PsPoint| -> Vec<i64> {
        let mut k: Vec<i64> = p.x.iter().zip(&anchor.x).map(|(v, c)| ((v - c) / h).floor() as i64).collect();
        k.push(((p.t - anchor.t) / ht).floor() as i64);
        k
    };
    let point = |k: &[i64]| PsPoint::new((0..n).map(|i| anchor.x[i] + k[i] as f64 * h).collect(), anchor.t + k[n] as f64 * ht);
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, a) in atoms.iter().enumerate() {
        buckets.entry(cell(a)).or_default().push(i);
    }
    let near_x = res.band.0.ceil() as i64 + 1;
    let near_t = res.band.0.powf(2.0 * s).ceil() as i64 + 1;
    let too_close = |p: &PsPoint, k: &[i64]| -> bool {
        let mut offset = vec![-near_x; n + 1];
        offset[n] = -near_t;
        loop {
            let key: Vec<i64> = k.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(list) = buckets.get(&key) {
                if list.iter().any(|&i| ps_dist_raw(&p.x, p.t, &atoms[i].x, atoms[i].t, s) < lo) {
                    return true;
                }
            }
            let mut d = 0;
            loop {
                if d > n {
                    return false;
                }
                let limit = if d == n { near_t } else { near_x };
                offset[d] += 1;
                if offset[d] <= limit {
                    break;
                }
                offset[d] = -limit;
                d += 1;
            }
        }
    };
    let mut lattice: BTreeSet<Vec<i64>> = BTreeSet::new();
    for a in atoms {
        let base = cell(a);
        let mut offset = vec![-reach_x; n + 1];
        offset[n] = -reach_t;
        'scan: loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(a, b)| a + b).collect();
            let p = point(&key);
            if ps_dist_raw(&p.x, p.t, &a.x, a.t, s) <= hi {
                lattice.insert(key);
            }
            let mut d = 0;
            loop {
                if d > n {
                    break 'scan;
                }
                let limit = if d == n { reach_t + 1 } else { reach_x + 1 };
                offset[d] += 1;
                if offset[d] <= limit {
                    break;
                }
                offset[d] = if d == n { -reach_t } else { -reach_x };
                d += 1;
            }
        }
    }
    let kept: Vec<Vec<i64>> = lattice.into_iter().filter(|k| !too_close(&point(k), k)).collect();
    let stride = match res.max_eval_points {
        Some(0) => return Err(CapacityError::InvalidParameter("max_eval_points must be positive".into())),
        Some(max) if kept.len() > max => kept.len().div_ceil(max),
        _ => 1,
    };
    Ok(kept.iter().step_by(stride).map(|k| point(k)).collect())
}

/// Assembly for the generation-`k` atoms of a Cantor construction: one atom
/// per cube at the cube centre, growth cubes the construction cubes of
/// generations `0..=k`, eval spacing half of `ℓ_k`.
pub fn assemble_cantor(spec: &CantorSpec, k: usize, kernel: KernelSpec, enforce_conjugate: bool, res: &Resolution) -> Result<CapacityProblem, CapacityError> {
    kernel.validate()?;
    if kernel.n != spec.n || kernel.s != spec.s {
        return Err(CapacityError::InvalidParameter("kernel and Cantor parameters differ".into()));
    }
    let cantor_err = |e: crate::error::CantorError| CapacityError::InvalidParameter(e.to_string());
    let mut growth_cubes = Vec::new();
    for g in 0..=k {
        growth_cubes.extend(spec.generation(g).map_err(cantor_err)?.into_iter().map(|c| c.cube));
    }
    let atoms: Vec<PsPoint> = spec.generation(k).map_err(cantor_err)?.iter().map(|c| c.cube.center()).collect();
    let h = 0.5 * spec.side(k);
    let eval_points = eval_lattice(&atoms, &PsPoint::origin(spec.n), h, spec.s, res)?;
    let mut p = CapacityProblem::new(atoms, kernel);
    p.growth_cubes = growth_cubes;
    p.eval_points = eval_points;
    p.enforce_conjugate = enforce_conjugate;
    p.bound = res.bound;
    p.margin = res.band.0 * h * (1.0 - 1e-12);
    Ok(p)
}

/// `Γ̃`-type estimate: `∇_x P_s` kernel with the conjugate rows.
pub fn gamma_tilde_estimate(atoms: &[PsPoint], n: usize, s: f64, res: &Resolution) -> Result<(CapacityProblem, CapacityEstimate), CapacityError> {
    validate_s(s)?;
    let p = assemble(atoms, KernelSpec::new(KernelFamily::GradPs, n, s), true, res)?;
    let est = solve_capacity(&p, DEFAULT_LP_TOL)?;
    Ok((p, est))
}

/// `γ^{1/2}`-type estimate in `ℝ^2`: `(-Δ)^{1/2} W` kernel, no conjugate.
pub fn gamma_half_estimate(atoms: &[PsPoint], res: &Resolution) -> Result<(CapacityProblem, CapacityEstimate), CapacityError> {
    let p = assemble(atoms, KernelSpec::new(KernelFamily::HalfLapW, 1, 1.0), false, res)?;
    let est = solve_capacity(&p, DEFAULT_LP_TOL)?;
    Ok((p, est))
}

/// The same assembly with the `∇_x W` kernel, no conjugate.
pub fn gamma_grad_heat_estimate(atoms: &[PsPoint], n: usize, res: &Resolution) -> Result<(CapacityProblem, CapacityEstimate), CapacityError> {
    let p = assemble(atoms, KernelSpec::new(KernelFamily::GradW, n, 1.0), false, res)?;
    let est = solve_capacity(&p, DEFAULT_LP_TOL)?;
    Ok((p, est))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentCapacity {
    pub estimate: f64,
    pub content: f64,
    /// `estimate / content`, `0` when both vanish.
    pub ratio: f64,
    pub atoms: usize,
    pub evals: usize,
}

/// `gamma_tilde_estimate` against the dyadic upper bound for the
/// `(n+1)`-dimensional content over the same root and levels.
pub fn content_capacity_report(atoms: &[PsPoint], n: usize, s: f64, res: &Resolution) -> Result<ContentCapacity, CapacityError> {
    let (p, est) = gamma_tilde_estimate(atoms, n, s, res)?;
    let root = match &res.root {
        Some(r) => r.clone(),
        None => bounding_cube(atoms, s)?,
    };
    let content = hausdorff_content_upper_in(atoms, n as f64 + 1.0, &root, res.level)?;
    let ratio = if content > 0.0 { est.value / content } else { 0.0 };
    Ok(ContentCapacity { estimate: est.value, content, ratio, atoms: p.candidate_atoms.len(), evals: p.eval_points.len() })
}

/// `‖∂_t^{1/(2s)} P_s * μ‖_{*, p_s}` of an optimal measure, sampled on
/// `cubes`; not an LP constraint.
pub fn a_posteriori_bmo(p: &CapacityProblem, est: &CapacityEstimate, cubes: &[PsCube], samples_per_cube: usize, seed: u64) -> Result<BmoEstimate, CapacityError> {
    let spec = KernelSpec::new(KernelFamily::DtFracPs, p.n(), p.kernel.s);
    let kernel = Kernel::build(&spec)?;
    let atoms: Vec<(&PsPoint, f64)> = p.candidate_atoms.iter().zip(&est.optimal_weights).filter(|(_, w)| **w > 0.0).map(|(a, w)| (a, *w)).collect();
    let field = |x: &PsPoint| -> Result<f64, String> {
        let mut dx = vec![0.0; x.n()];
        let mut out = [0.0];
        let mut acc = 0.0;
        for (a, w) in &atoms {
            for k in 0..dx.len() {
                dx[k] = x.x[k] - a.x[k];
            }
            kernel.eval_into(&dx, x.t - a.t, &mut out).map_err(|e| e.to_string())?;
            acc += w * out[0];
        }
        Ok(acc)
    };
    bmo_oscillation(field, cubes, samples_per_cube, seed).map_err(|e| CapacityError::InvalidParameter(e.to_string()))
}
