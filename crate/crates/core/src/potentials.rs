//! Truncated potentials `Σ_{p_s(x̄, ā) > ε} K(x̄ - ā) w_a` of discrete
//! measures and the maximal operators built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::CantorSpec;
use crate::error::{GeoError, KernelError, PotentialError};
use crate::kernels::{Kernel, KernelSpec, QuadratureConfig};
use crate::measures::DiscreteMeasure;
use crate::psgeo::{ps_dist_raw, PsCube, PsPoint};
use crate::quad::{integrate, CompensatedSum, QuadTol};

#[derive(Clone, Debug)]
pub struct PotentialRequest {
    pub kernel: KernelSpec,
    pub measure: DiscreteMeasure,
    pub eval_points: Vec<PsPoint>,
    /// Strictly positive and strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Evaluate `K(ā - x̄)` instead of `K(x̄ - ā)`.
    pub conjugate: bool,
}

impl PotentialRequest {
    pub fn new(kernel: KernelSpec, measure: DiscreteMeasure, eval_points: Vec<PsPoint>, epsilons: Vec<f64>) -> Result<Self, PotentialError> {
        let req = Self { kernel, measure, eval_points, epsilons, conjugate: false };
        req.validate()?;
        Ok(req)
    }

    pub fn with_conjugate(mut self, conjugate: bool) -> Self {
        self.conjugate = conjugate;
        self
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        self.kernel.validate()?;
        if self.kernel.n != self.measure.n() {
            return Err(PotentialError::InvalidParameter(format!("kernel has n = {}, measure has n = {}", self.kernel.n, self.measure.n())));
        }
        if (self.kernel.s - self.measure.s()).abs() > 1e-15 {
            return Err(PotentialError::InvalidParameter(format!("kernel has s = {}, measure has s = {}", self.kernel.s, self.measure.s())));
        }
        for p in &self.eval_points {
            if p.n() != self.measure.n() {
                return Err(GeoError::DimensionMismatch { expected: self.measure.n(), found: p.n() }.into());
            }
        }
        check_epsilons(&self.epsilons)
    }
}

fn check_epsilons(eps: &[f64]) -> Result<(), PotentialError> {
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(PotentialError::InvalidParameter("epsilons must be positive and finite".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(PotentialError::InvalidParameter("epsilons must be strictly decreasing".into()));
    }
    Ok(())
}

/// `ε_j = diam · 2^{-j}` for `j = 0..=J`, `J` the first index with
/// `ε_J < r_floor`.
pub fn dyadic_epsilons(diam: f64, r_floor: f64) -> Result<Vec<f64>, PotentialError> {
    if !(diam > 0.0 && r_floor > 0.0 && diam.is_finite()) {
        return Err(PotentialError::InvalidParameter("diam and r_floor must be positive".into()));
    }
    let mut eps = vec![diam];
    while *eps.last().unwrap() >= r_floor {
        eps.push(eps.last().unwrap() * 0.5);
    }
    Ok(eps)
}

#[inline]
fn eval_pair(kernel: &Kernel, x: &PsPoint, ax: &[f64], at: f64, conjugate: bool, dx: &mut [f64], out: &mut [f64]) -> Result<(), KernelError> {
    let sign = if conjugate { -1.0 } else { 1.0 };
    for (k, d) in dx.iter_mut().enumerate() {
        *d = sign * (x.x[k] - ax[k]);
    }
    kernel.eval_into(dx, sign * (x.t - at), out)
}

/// Per eval point, the components of the truncated potential at `eps`.
pub fn truncated_potential(req: &PotentialRequest, eps: f64) -> Result<Vec<Vec<f64>>, PotentialError> {
    req.validate()?;
    check_epsilons(&[eps])?;
    let kernel = Kernel::build(&req.kernel)?;
    let m = &req.measure;
    let s = m.s();
    let comps = kernel.components();
    req.eval_points
        .par_iter()
        .enumerate()
        .map(|(pi, x)| {
            let mut acc = vec![CompensatedSum::new(); comps];
            let mut dx = vec![0.0; m.n()];
            let mut val = vec![0.0; comps];
            for a in 0..m.len() {
                if ps_dist_raw(&x.x, x.t, m.x(a), m.t(a), s) <= eps {
                    continue;
                }
                eval_pair(&kernel, x, m.x(a), m.t(a), req.conjugate, &mut dx, &mut val).map_err(|source| PotentialError::AtomKernel { point: pi, atom: a, source })?;
                for (c, v) in acc.iter_mut().zip(&val) {
                    c.add(v * m.weight(a));
                }
            }
            Ok(acc.iter().map(CompensatedSum::value).collect())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalPotential {
    /// Per eval point, `max_ε |P_ε|` with the Euclidean norm for vector
    /// kernels.
    pub magnitude: Vec<f64>,
    /// Per eval point and component, `max_ε |P_ε^{(i)}|`.
    pub components: Vec<Vec<f64>>,
    /// Per eval point, the ε attaining `magnitude`.
    pub argmax_eps: Vec<f64>,
    /// Per eval point and ε, the truncated potential components.
    pub values: Vec<Vec<Vec<f64>>>,
}

/// Max over the request's ε-grid of the truncated potential.
pub fn maximal_potential(req: &PotentialRequest) -> Result<MaximalPotential, PotentialError> {
    req.validate()?;
    if req.epsilons.is_empty() {
        return Err(PotentialError::InvalidParameter("empty epsilon grid".into()));
    }
    let kernel = Kernel::build(&req.kernel)?;
    let m = &req.measure;
    let s = m.s();
    let comps = kernel.components();
    let per_point: Vec<Vec<Vec<f64>>> = req
        .eval_points
        .par_iter()
        .enumerate()
        .map(|(pi, x)| {
            let last = *req.epsilons.last().unwrap();
            let mut terms: Vec<(f64, usize)> = (0..m.len()).map(|a| (ps_dist_raw(&x.x, x.t, m.x(a), m.t(a), s), a)).filter(|(d, _)| *d > last).collect();
            // far atoms first, ties by index
            terms.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)));
            let mut acc = vec![CompensatedSum::new(); comps];
            let mut dx = vec![0.0; m.n()];
            let mut val = vec![0.0; comps];
            let mut next = 0;
            let mut out = Vec::with_capacity(req.epsilons.len());
            for &eps in &req.epsilons {
                while next < terms.len() && terms[next].0 > eps {
                    let a = terms[next].1;
                    eval_pair(&kernel, x, m.x(a), m.t(a), req.conjugate, &mut dx, &mut val).map_err(|source| PotentialError::AtomKernel { point: pi, atom: a, source })?;
                    for (c, v) in acc.iter_mut().zip(&val) {
                        c.add(v * m.weight(a));
                    }
                    next += 1;
                }
                out.push(acc.iter().map(CompensatedSum::value).collect());
            }
            Ok(out)
        })
        .collect::<Result<_, PotentialError>>()?;
    let mut result = MaximalPotential { magnitude: Vec::new(), components: Vec::new(), argmax_eps: Vec::new(), values: Vec::new() };
    for values in per_point {
        let mut best = (0.0f64, req.epsilons[0]);
        let mut comp_max = vec![0.0f64; comps];
        for (v, &eps) in values.iter().zip(&req.epsilons) {
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > best.0 {
                best = (norm, eps);
            }
            for (cm, c) in comp_max.iter_mut().zip(v) {
                *cm = cm.max(c.abs());
            }
        }
        result.magnitude.push(best.0);
        result.argmax_eps.push(best.1);
        result.components.push(comp_max);
        result.values.push(values);
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedMaximal {
    /// `max_h |P_ν χ_{ℝ^{n+1} ∖ Q^h_x}(x)|` over `h = k..=k+m`.
    pub value: f64,
    /// Components of `P_ν χ_{ℝ^{n+1} ∖ Q^h_x}(x)` for `h = k..=k+m`.
    pub complements: Vec<Vec<f64>>,
    /// Components of `P_ν χ_{Q^h_x ∖ Q^{h+1}_x}(x)` for `h = k..k+m`.
    pub shells: Vec<Vec<f64>>,
    /// First component of each shell.
    pub shell_first: Vec<f64>,
}

/// The point of the generation-`k` cube with index `index` whose spatial
/// coordinates are minimal and whose time is maximal.
pub fn upper_left_corner(spec: &CantorSpec, k: usize, index: u128) -> Result<PsPoint, PotentialError> {
    let q = spec.cube_at(k, index)?.cube;
    Ok(PsPoint::new(q.corner.x.clone(), q.corner.t + q.time_side()))
}

/// Index of the generation-`k` cube reached by taking, at every
/// generation, the child with minimal spatial and maximal time position.
pub fn upper_left_index(spec: &CantorSpec, k: usize) -> u128 {
    let c = u128::from(spec.children());
    (0..k).fold(0u128, |acc, _| acc * c + u128::from(spec.delta)) + 1
}

/// The natural measure of `spec` discretized around `x`: each sibling of a
/// chain cube `Q^g_x`, `g = 1..=top`, is split into its descendants of
/// generation `min(g + extra, depth)` with one centred atom each, and
/// `Q^top_x` is a single centred atom.
pub fn chain_refined_measure(spec: &CantorSpec, x: &PsPoint, top: usize, extra: usize) -> Result<DiscreteMeasure, PotentialError> {
    let chain = spec.locate_chain(x, top)?;
    if chain.len() <= top {
        return Err(PotentialError::InvalidParameter(format!("point lies outside every generation-{top} cube")));
    }
    let c = u128::from(spec.children());
    let mut nu = DiscreteMeasure::empty(spec.n, spec.s).map_err(|e| PotentialError::InvalidParameter(e.to_string()))?;
    let mut push = |q: &PsCube, generation: usize| -> Result<(), PotentialError> {
        let p = q.center();
        nu.push(&p.x, p.t, 1.0 / spec.count(generation) as f64).map_err(|e| PotentialError::InvalidParameter(e.to_string()))
    };
    for g in 1..=top {
        let parent = chain[g - 1].index;
        let own = chain[g].index;
        let leaf = (g + extra).min(spec.depth).max(g);
        let span = c.pow((leaf - g) as u32);
        for sibling in (parent - 1) * c + 1..=parent * c {
            if sibling == own {
                continue;
            }
            for index in (sibling - 1) * span + 1..=sibling * span {
                push(&spec.cube_at(leaf, index)?.cube, leaf)?;
            }
        }
    }
    push(&chain[top].cube, top)?;
    Ok(nu)
}

/// Potentials of `ν` restricted to the complements of the Cantor cubes
/// `Q^h_x` containing `x`, `h = k..=k+m`. Cube membership is closed.
pub fn cantor_restricted_maximal(spec: &CantorSpec, nu: &DiscreteMeasure, x: &PsPoint, k: usize, m: usize, kernel: &Kernel) -> Result<RestrictedMaximal, PotentialError> {
    let top = k + m;
    let chain = spec.locate_chain(x, top)?;
    if chain.len() <= k {
        return Err(PotentialError::InvalidParameter(format!("point lies outside every generation-{k} cube")));
    }
    if chain.len() <= top {
        return Err(PotentialError::InvalidParameter(format!("point lies outside every generation-{top} cube")));
    }
    if nu.n() != spec.n || kernel.spec().n != spec.n {
        return Err(GeoError::DimensionMismatch { expected: spec.n, found: nu.n() }.into());
    }
    let comps = kernel.components();
    let side = spec.side(top);
    let slack = 1e-12 * side;
    let inside = |q: &PsCube, a: usize| nu.x(a).iter().zip(&q.corner.x).all(|(v, c)| *v >= c - slack && *v <= c + q.side + slack) && nu.t(a) >= q.corner.t - slack && nu.t(a) <= q.corner.t + q.time_side() + slack;
    // bucket b = number of chain cubes Q^k..Q^{k+m} containing the atom
    let contributions: Vec<(usize, Vec<f64>)> = (0..nu.len())
        .into_par_iter()
        .map(|a| {
            let mut depth = 0;
            while depth <= m && inside(&chain[k + depth].cube, a) {
                depth += 1;
            }
            let mut dx = vec![0.0; spec.n];
            let mut val = vec![0.0; comps];
            if depth == m + 1 {
                return Ok((depth, val));
            }
            eval_pair(kernel, x, nu.x(a), nu.t(a), false, &mut dx, &mut val).map_err(|source| PotentialError::AtomKernel { point: 0, atom: a, source })?;
            val.iter_mut().for_each(|v| *v *= nu.weight(a));
            Ok((depth, val))
        })
        .collect::<Result<_, PotentialError>>()?;
    let mut buckets = vec![vec![CompensatedSum::new(); comps]; m + 2];
    for (depth, val) in &contributions {
        for (acc, v) in buckets[*depth].iter_mut().zip(val) {
            acc.add(*v);
        }
    }
    let bucket_values: Vec<Vec<f64>> = buckets.iter().map(|b| b.iter().map(CompensatedSum::value).collect()).collect();
    // complement of Q^{k+j} holds buckets 0..=j
    let mut complements = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let mut acc = vec![CompensatedSum::new(); comps];
        for b in &buckets[..=j] {
            for (a, c) in acc.iter_mut().zip(b) {
                a.add(c.value());
            }
        }
        complements.push(acc.iter().map(CompensatedSum::value).collect::<Vec<f64>>());
    }
    let shells: Vec<Vec<f64>> = bucket_values[1..=m].to_vec();
    let shell_first = shells.iter().map(|v| v[0]).collect();
    let value = complements.iter().map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
    Ok(RestrictedMaximal { value, complements, shells, shell_first })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentShells {
    /// Shell `h` integrates over `t0 - t ∈ [2^{h-2(k+m)}, 2^{h+1-2(k+m)}]`,
    /// `h = 0..=2m+1`.
    pub shells: Vec<f64>,
    pub total: f64,
    /// `g(0) ln 2`, the exact value of every shell.
    pub analytic: f64,
}

/// Integrals of `(-Δ)^{1/2} W(0, t0 - t)` over the dyadic shells below
/// `t0` for arclength on `{0} × [0, 1]`.
pub fn segment_potential_shells(t0: f64, k: u32, m: u32, quad: &QuadratureConfig) -> Result<SegmentShells, PotentialError> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(PotentialError::InvalidParameter(format!("t0 = {t0} must lie in (0, 1)")));
    }
    let g = crate::kernels::heat::shared_half_lap(quad)?;
    let top = 2 * (k + m);
    let outermost = 2f64.powi(2 * m as i32 + 2 - top as i32);
    if t0 - outermost < 0.0 {
        return Err(PotentialError::InvalidParameter(format!("shells leave [0, 1] below t = {}; increase k", t0 - outermost)));
    }
    let tol = QuadTol::new(quad.abs_tol, quad.rel_tol).with_max_intervals(quad.max_panels);
    let mut shells = Vec::with_capacity(2 * m as usize + 2);
    for h in 0..=(2 * m + 1) {
        let lo = 2f64.powi(h as i32 - top as i32);
        let hi = 2.0 * lo;
        // integrate in t over [t0 - hi, t0 - lo]
        let v = integrate(|t| g.kernel(0.0, t0 - t), t0 - hi, t0 - lo, tol)?.value;
        shells.push(v);
    }
    let total = shells.iter().sum();
    Ok(SegmentShells { shells, total, analytic: g.at_origin() * std::f64::consts::LN_2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoEstimate {
    /// Max over the cubes.
    pub sup: f64,
    /// Per cube, the sampled mean of `|f - f_Q|`.
    pub per_cube: Vec<f64>,
}

/// Stratified Monte-Carlo estimate of `sup_Q |Q|^{-1} ∫_Q |f - f_Q|`.
///
/// Each cube is cut into `b^{n+1}` equal cells, `b = ⌊samples^{1/(n+1)}⌋`,
/// with one uniform sample per cell and the remainder uniform on the cube.
pub fn bmo_oscillation<F>(field: F, cubes: &[PsCube], samples_per_cube: usize, seed: u64) -> Result<BmoEstimate, PotentialError>
where
    F: Fn(&PsPoint) -> Result<f64, String> + Sync,
{
    if samples_per_cube < 16 {
        return Err(PotentialError::InvalidParameter("at least 16 samples per cube are required".into()));
    }
    if cubes.is_empty() {
        return Err(PotentialError::InvalidParameter("empty cube family".into()));
    }
    let per_cube: Vec<f64> = cubes
        .par_iter()
        .enumerate()
        .map(|(ci, q)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let dim = q.n() + 1;
            let b = (samples_per_cube as f64).powf(1.0 / dim as f64).floor().max(1.0) as usize;
            let mut b_pow = b.pow(dim as u32);
            if b_pow > samples_per_cube {
                b_pow = 1;
            }
            let strata = if b_pow == 1 { 1 } else { b };
            let ts = q.time_side();
            let mut values = Vec::with_capacity(samples_per_cube);
            for i in 0..samples_per_cube {
                let mut cell = if i < b_pow && strata > 1 { i } else { usize::MAX };
                let mut x = Vec::with_capacity(dim - 1);
                for c in &q.corner.x {
                    let u: f64 = rng.gen();
                    x.push(c + q.side * stratum(&mut cell, strata, u));
                }
                let u: f64 = rng.gen();
                let t = q.corner.t + ts * stratum(&mut cell, strata, u);
                let p = PsPoint::new(x, t);
                values.push(field(&p).map_err(|message| PotentialError::Field { cube: ci, message })?);
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            Ok(values.iter().map(|v| (v - mean).abs()).sum::<f64>() / values.len() as f64)
        })
        .collect::<Result<_, PotentialError>>()?;
    let sup = per_cube.iter().copied().fold(0.0, f64::max);
    Ok(BmoEstimate { sup, per_cube })
}

/// Position in `[0, 1)` of a uniform draw `u` within the next axis of the
/// stratum index `cell` (`usize::MAX` for an unstratified draw).
fn stratum(cell: &mut usize, strata: usize, u: f64) -> f64 {
    if *cell == usize::MAX {
        return u;
    }
    let j = *cell % strata;
    *cell /= strata;
    (j as f64 + u) / strata as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::AtomPlacement;
    use crate::kernels::KernelFamily;
    use crate::psgeo::ps_dist;
    use rand::SeedableRng;

    fn random_measure(seed: u64, count: usize, n: usize, s: f64) -> DiscreteMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: Vec<PsPoint> = (0..count).map(|_| PsPoint::new((0..n).map(|_| rng.gen::<f64>()).collect(), rng.gen())).collect();
        let weights = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DiscreteMeasure::from_atoms(&atoms, weights, n, s).unwrap()
    }

    fn random_points(seed: u64, count: usize, n: usize) -> Vec<PsPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| PsPoint::new((0..n).map(|_| rng.gen_range(-0.5..1.5)).collect(), rng.gen_range(-0.5..1.5))).collect()
    }

    #[test]
    fn trivial_truncations() {
        let spec = KernelSpec::new(KernelFamily::Ps, 1, 0.75);
        let m = DiscreteMeasure::from_atoms(&[PsPoint::new(vec![0.2], 0.1)], vec![1.0], 1, 0.75).unwrap();
        let x = PsPoint::new(vec![0.5], 0.9);
        let req = PotentialRequest::new(spec.clone(), m.clone(), vec![x.clone()], vec![1.0, 0.5, 0.25]).unwrap();
        let far = truncated_potential(&req, 10.0).unwrap();
        assert_eq!(far[0][0], 0.0);
        let near = truncated_potential(&req, 0.01).unwrap();
        let direct = Kernel::build(&spec).unwrap().eval(&PsPoint::new(vec![0.3], 0.8)).unwrap()[0];
        assert_eq!(near[0][0], direct);
        // single atom: the maximal value is the term once ε drops below its distance
        let d = ps_dist(&x, &m.atom(0), 0.75).unwrap();
        let max = maximal_potential(&req).unwrap();
        assert_eq!(max.magnitude[0], direct.abs());
        assert!(max.argmax_eps[0] < d);
        let zero = PotentialRequest::new(spec, m.scaled(0.0), vec![x], vec![1.0, 0.1]).unwrap();
        assert_eq!(maximal_potential(&zero).unwrap().magnitude[0], 0.0);
    }

    #[test]
    fn odd_kernel_cancels() {
        let spec = KernelSpec::new(KernelFamily::GradPs, 2, 0.8);
        let atoms = [PsPoint::new(vec![1.0, 0.0], 0.0), PsPoint::new(vec![-1.0, 0.0], 0.0)];
        let m = DiscreteMeasure::from_atoms(&atoms, vec![1.0, 1.0], 2, 0.8).unwrap();
        let req = PotentialRequest::new(spec, m, vec![PsPoint::new(vec![0.0, 0.0], 0.7)], vec![0.1]).unwrap();
        let v = truncated_potential(&req, 0.1).unwrap();
        assert!(v[0][0].abs() < 1e-15);
    }

    #[test]
    fn linear_in_weights() {
        let spec = KernelSpec::new(KernelFamily::GradPs, 2, 0.75);
        let a = random_measure(1, 200, 2, 0.75);
        let b = a.with_weights(random_measure(2, 200, 2, 0.75).weights().to_vec()).unwrap();
        let sum = a.with_weights(a.weights().iter().zip(b.weights()).map(|(x, y)| 2.0 * x - 3.0 * y).collect()).unwrap();
        let pts = random_points(4, 20, 2);
        let eval = |m: &DiscreteMeasure| truncated_potential(&PotentialRequest::new(spec.clone(), m.clone(), pts.clone(), vec![0.05]).unwrap(), 0.05).unwrap();
        let (va, vb, vs) = (eval(&a), eval(&b), eval(&sum));
        for i in 0..pts.len() {
            for c in 0..2 {
                let expect = 2.0 * va[i][c] - 3.0 * vb[i][c];
                assert!((vs[i][c] - expect).abs() <= 1e-12 * (va[i][c].abs() + vb[i][c].abs()).max(1.0));
            }
        }
    }

    #[test]
    fn monotone_in_epsilon_for_positive_kernels() {
        let spec = KernelSpec::new(KernelFamily::Ps, 1, 0.9);
        let m = random_measure(5, 300, 1, 0.9).variation();
        let eps = dyadic_epsilons(2.0, 1e-3).unwrap();
        let req = PotentialRequest::new(spec, m, random_points(6, 15, 1), eps).unwrap();
        let max = maximal_potential(&req).unwrap();
        for values in &max.values {
            for w in values.windows(2) {
                assert!(w[1][0] >= w[0][0]);
            }
        }
    }

    #[test]
    fn conjugate_is_reflection() {
        let spec = KernelSpec::new(KernelFamily::GradPs, 1, 0.7);
        let m = random_measure(7, 150, 1, 0.7);
        let pts = random_points(8, 10, 1);
        let neg: Vec<PsPoint> = pts.iter().map(|p| PsPoint::new(p.x.iter().map(|v| -v).collect(), -p.t)).collect();
        let conj = truncated_potential(&PotentialRequest::new(spec.clone(), m.clone(), pts, vec![0.02]).unwrap().with_conjugate(true), 0.02).unwrap();
        let refl = truncated_potential(&PotentialRequest::new(spec, m.reflected(), neg, vec![0.02]).unwrap(), 0.02).unwrap();
        assert_eq!(conj, refl);
    }

    #[test]
    fn maximal_agrees_with_single_truncations() {
        let spec = KernelSpec::new(KernelFamily::GradPs, 2, 0.9);
        let m = random_measure(9, 250, 2, 0.9);
        let eps = dyadic_epsilons(1.5, 0.01).unwrap();
        let req = PotentialRequest::new(spec, m, random_points(10, 8, 2), eps.clone()).unwrap();
        let max = maximal_potential(&req).unwrap();
        for (j, &e) in eps.iter().enumerate() {
            let v = truncated_potential(&req, e).unwrap();
            for i in 0..v.len() {
                for c in 0..2 {
                    assert!((v[i][c] - max.values[i][j][c]).abs() <= 1e-12 * v[i][c].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let spec = KernelSpec::new(KernelFamily::Ps, 1, 0.75);
        let m = random_measure(11, 5, 1, 0.75);
        assert!(PotentialRequest::new(spec.clone(), m.clone(), vec![], vec![0.5, 1.0]).is_err());
        assert!(PotentialRequest::new(spec.clone(), m.clone(), vec![], vec![0.0]).is_err());
        assert!(PotentialRequest::new(spec.clone(), m.clone(), vec![PsPoint::new(vec![0.0, 0.0], 0.0)], vec![1.0]).is_err());
        assert!(PotentialRequest::new(KernelSpec::new(KernelFamily::Ps, 1, 0.8), m, vec![], vec![1.0]).is_err());
        // a time-derivative kernel hit at its pole names the atom
        let dspec = KernelSpec::new(KernelFamily::DtFracPs, 1, 1.0);
        let atom = DiscreteMeasure::from_atoms(&[PsPoint::new(vec![0.0], 0.0)], vec![1.0], 1, 1.0).unwrap();
        let req = PotentialRequest { kernel: dspec, measure: atom, eval_points: vec![PsPoint::new(vec![0.0], 1e-30)], epsilons: vec![1e-40], conjugate: false };
        assert!(matches!(truncated_potential(&req, 1e-40), Err(PotentialError::AtomKernel { atom: 0, .. })));
    }

    #[test]
    fn cantor_shells_are_nonnegative_and_additive() {
        let spec = CantorSpec::critical(1, 0.75, 5).unwrap();
        let nu = spec.natural_measure(5, AtomPlacement::Center).unwrap();
        let kernel = Kernel::build(&KernelSpec::new(KernelFamily::GradPs, 1, 0.75)).unwrap();
        let x = upper_left_corner(&spec, 0, 1).unwrap();
        let r = cantor_restricted_maximal(&spec, &nu, &x, 0, 4, &kernel).unwrap();
        assert_eq!(r.complements.len(), 5);
        assert_eq!(r.shells.len(), 4);
        for (h, shell) in r.shell_first.iter().enumerate() {
            assert!(*shell >= 0.0, "shell {h}: {shell}");
            let diff = r.complements[h + 1][0] - r.complements[h][0];
            assert!((diff - shell).abs() <= 1e-12 * r.complements[h + 1][0].abs().max(1.0));
        }
        let degenerate = cantor_restricted_maximal(&spec, &nu, &x, 2, 0, &kernel).unwrap();
        assert!(degenerate.shells.is_empty());
        assert_eq!(degenerate.value, degenerate.complements[0][0].abs());
        assert!(cantor_restricted_maximal(&spec, &nu, &PsPoint::new(vec![0.5], 0.5), 1, 1, &kernel).is_err());
    }

    #[test]
    fn upper_left_chain_shares_the_corner() {
        let spec = CantorSpec::critical(2, 1.0, 7).unwrap();
        for k in 0..=7 {
            let z = upper_left_corner(&spec, k, upper_left_index(&spec, k)).unwrap();
            assert!(z.x.iter().all(|v| v.abs() < 1e-15) && (z.t - 1.0).abs() < 1e-14, "k={k}: {z:?}");
            let chain = spec.locate_chain(&z, 7).unwrap();
            assert_eq!(chain.len(), 8);
            assert_eq!(chain[k].index, upper_left_index(&spec, k));
        }
    }

    #[test]
    fn full_refinement_is_the_natural_measure() {
        let spec = CantorSpec::critical(1, 0.75, 3).unwrap();
        let x = upper_left_corner(&spec, 3, 5).unwrap();
        let nu = chain_refined_measure(&spec, &x, 3, 3).unwrap();
        let mu = spec.natural_measure(3, AtomPlacement::Center).unwrap();
        let key = |m: &DiscreteMeasure| {
            let mut v: Vec<(u64, u64, u64)> = (0..m.len()).map(|i| (m.x(i)[0].to_bits(), m.t(i).to_bits(), m.weight(i).to_bits())).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&nu), key(&mu));
        let coarse = chain_refined_measure(&spec, &x, 2, 0).unwrap();
        assert_eq!(coarse.len(), 2 * 11 + 1);
        assert!((coarse.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn segment_shells_are_log_two() {
        let cfg = QuadratureConfig::default();
        let r = segment_potential_shells(0.5, 2, 3, &cfg).unwrap();
        assert_eq!(r.shells.len(), 8);
        assert!((r.analytic - std::f64::consts::PI.sqrt() * std::f64::consts::LN_2).abs() < 1e-10);
        for v in &r.shells {
            assert!((v - r.analytic).abs() < 1e-8);
        }
        assert!(segment_potential_shells(0.1, 0, 3, &cfg).is_err());
        assert!(segment_potential_shells(1.0, 3, 1, &cfg).is_err());
    }

    #[test]
    fn bmo_of_simple_fields() {
        let cubes: Vec<PsCube> = (0..5).map(|i| PsCube::new(PsPoint::new(vec![f64::from(i), 0.0], 0.3), 0.5 + 0.1 * f64::from(i), 0.8).unwrap()).collect();
        let constant = bmo_oscillation(|_| Ok(3.0), &cubes, 64, 1).unwrap();
        assert_eq!(constant.sup, 0.0);
        let centers: Vec<f64> = cubes.iter().map(|q| q.center().x[0]).collect();
        let step = bmo_oscillation(
            |p| {
                let c = centers.iter().copied().min_by(|a, b| (a - p.x[0]).abs().total_cmp(&(b - p.x[0]).abs())).unwrap();
                Ok(if p.x[0] >= c { 1.0 } else { 0.0 })
            },
            &cubes,
            4096,
            2,
        )
        .unwrap();
        for v in &step.per_cube {
            assert!((v - 0.5).abs() < 0.05, "{v}");
        }
        let again = bmo_oscillation(|p| Ok(p.t.sin() + p.x[1]), &cubes, 100, 9).unwrap();
        assert_eq!(again, bmo_oscillation(|p| Ok(p.t.sin() + p.x[1]), &cubes, 100, 9).unwrap());
        assert!(matches!(bmo_oscillation(|_| Err("boom".into()), &cubes, 16, 0), Err(PotentialError::Field { cube: 0, .. })));
        assert!(bmo_oscillation(|_| Ok(0.0), &cubes, 8, 0).is_err());
    }
}
