//! Dense LP solver for `max cᵀw  s.t.  A w <= b,  w >= 0` with `b >= 0`.
//!
//! The solver walks vertices of the feasible polytope. A vertex is held as
//! `N` active constraints (rows of `A` or bounds `-w_j <= 0`) together with
//! the explicit inverse of their `N × N` normal matrix, updated by
//! Sherman–Morrison after each exchange and refactored periodically. Pricing
//! is Dantzig on the active multipliers, switching to Bland's rule after a
//! run of degenerate steps; ties break toward the lowest constraint index.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::LpError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    cols: usize,
    objective: Vec<f64>,
    /// Row-major `m × cols`.
    matrix: Vec<f64>,
    upper: Vec<f64>,
}

impl LpInstance {
    pub fn new(objective: Vec<f64>) -> Result<Self, LpError> {
        if objective.is_empty() {
            return Err(LpError::Shape("no columns".into()));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Shape("objective has non-finite entries".into()));
        }
        Ok(Self { cols: objective.len(), objective, matrix: Vec::new(), upper: Vec::new() })
    }

    /// `max Σ w_j`.
    pub fn with_unit_objective(cols: usize) -> Result<Self, LpError> {
        Self::new(vec![1.0; cols])
    }

    pub fn add_row(&mut self, coeffs: &[f64], upper: f64) -> Result<(), LpError> {
        if coeffs.len() != self.cols {
            return Err(LpError::Shape(format!("row has {} entries, expected {}", coeffs.len(), self.cols)));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !upper.is_finite() {
            return Err(LpError::Shape(format!("row {} has non-finite entries", self.rows())));
        }
        if upper < 0.0 {
            return Err(LpError::InfeasibleOrigin { row: self.rows(), upper });
        }
        self.matrix.extend_from_slice(coeffs);
        self.upper.push(upper);
        Ok(())
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.upper.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Largest violation of `A w <= b` and `w >= 0`, relative to `1 + |b_i|`.
    pub fn primal_residual(&self, w: &[f64]) -> f64 {
        let mut worst = w.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for i in 0..self.rows() {
            let lhs: f64 = self.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
            worst = worst.max((lhs - self.upper[i]).max(0.0) / (1.0 + self.upper[i].abs()));
        }
        worst
    }

    /// The sub-instance made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<LpInstance, LpError> {
        let mut sub = LpInstance::new(self.objective.clone())?;
        for &i in rows {
            if i >= self.rows() {
                return Err(LpError::Shape(format!("row {i} out of range")));
            }
            sub.add_row(self.row(i), self.upper[i])?;
        }
        Ok(sub)
    }

    /// The instance in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ exported by fracap\nMaximize\n obj:");
        write_linear(&mut out, (0..self.cols).map(|j| (j, self.objective[j])));
        out.push_str("\nSubject To\n");
        for i in 0..self.rows() {
            let _ = write!(out, " r{i}:");
            write_linear(&mut out, self.row(i).iter().copied().enumerate());
            let _ = writeln!(out, " <= {:.17e}", self.upper[i]);
        }
        out.push_str("Bounds\n");
        for j in 0..self.cols {
            let _ = writeln!(out, " w{j} >= 0");
        }
        out.push_str("End\n");
        out
    }
}

fn write_linear(out: &mut String, terms: impl Iterator<Item = (usize, f64)>) {
    let mut any = false;
    for (j, c) in terms {
        if c != 0.0 {
            let _ = write!(out, " {} {:.17e} w{j}", if c < 0.0 { "-" } else { "+" }, c.abs());
            any = true;
        }
    }
    if !any {
        out.push_str(" 0 w0");
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub value: f64,
    pub weights: Vec<f64>,
    /// Multipliers of the rows of `A`; zero for inactive rows.
    pub duals: Vec<f64>,
    /// Rows of `A` in the final active set, sorted.
    pub active_rows: Vec<usize>,
    pub iterations: usize,
    /// See [`LpInstance::primal_residual`].
    pub primal_residual: f64,
    /// `bᵀy - cᵀw`.
    pub duality_gap: f64,
    /// Largest violation of `Aᵀy >= c`.
    pub dual_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub tol: f64,
    pub max_iterations: Option<usize>,
    /// Refactor after this many exchanges, or `cols / 4` if larger.
    pub refactor_every: usize,
    pub degenerate_run_before_bland: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: None, refactor_every: 50, degenerate_run_before_bland: 20 }
    }
}

/// Solves with default options and the given tolerance.
pub fn solve_lp(lp: &LpInstance, tol: f64) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SimplexOptions { tol, ..SimplexOptions::default() })
}

pub fn solve_lp_with(lp: &LpInstance, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    Simplex::new(lp, opts).run()
}

/// Row generation: solves over `seed_rows` plus every row found violated
/// by an intermediate optimum, until none is. Falls back to the full
/// instance if a restricted problem is unbounded.
pub fn solve_lp_lazy(lp: &LpInstance, seed_rows: &[usize], opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    let mut working: Vec<usize> = seed_rows.to_vec();
    working.sort_unstable();
    working.dedup();
    let mut in_working = vec![false; lp.rows()];
    for &i in &working {
        if i >= lp.rows() {
            return Err(LpError::Shape(format!("seed row {i} out of range")));
        }
        in_working[i] = true;
    }
    let mut iterations = 0;
    loop {
        let sub = lp.select_rows(&working)?;
        let sol = match solve_lp_with(&sub, opts) {
            Ok(sol) => sol,
            Err(LpError::Unbounded { .. }) => {
                let mut full = solve_lp_with(lp, opts)?;
                full.iterations += iterations;
                return Ok(full);
            }
            Err(e) => return Err(e),
        };
        iterations += sol.iterations;
        let violated: Vec<usize> = (0..lp.rows())
            .filter(|&i| !in_working[i])
            .filter(|&i| {
                let lhs: f64 = lp.row(i).iter().zip(&sol.weights).map(|(a, b)| a * b).sum();
                lhs > lp.upper[i] + opts.tol * (1.0 + lp.upper[i].abs())
            })
            .collect();
        if violated.is_empty() {
            let mut duals = vec![0.0; lp.rows()];
            for (k, &i) in working.iter().enumerate() {
                duals[i] = sol.duals[k];
            }
            let mut active_rows: Vec<usize> = sol.active_rows.iter().map(|&k| working[k]).collect();
            active_rows.sort_unstable();
            return Ok(LpSolution {
                primal_residual: lp.primal_residual(&sol.weights),
                value: sol.value,
                weights: sol.weights,
                duals,
                active_rows,
                iterations,
                duality_gap: sol.duality_gap,
                dual_residual: sol.dual_residual,
            });
        }
        for i in violated {
            in_working[i] = true;
            working.push(i);
        }
        working.sort_unstable();
    }
}

/// Constraint `k < m` is row `k` of the scaled `A`; `k >= m` is `-w_{k-m} <= 0`.
struct Simplex<'a> {
    lp: &'a LpInstance,
    opts: SimplexOptions,
    n: usize,
    m: usize,
    /// Row scale factors: scaled row `i` is `A_i / scale_i`.
    scale: Vec<f64>,
    /// Scaled row-major matrix.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// `active[r]` is the constraint held in basis row `r`.
    active: Vec<usize>,
    is_active: Vec<bool>,
    /// Row-major inverse of the basis matrix whose rows are the active normals.
    inv: Vec<f64>,
    w: Vec<f64>,
    /// Scaled `A w`.
    aw: Vec<f64>,
    trace: Vec<String>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpInstance, opts: &SimplexOptions) -> Self {
        let n = lp.cols;
        let m = lp.rows();
        let mut scale = Vec::with_capacity(m);
        let mut a = Vec::with_capacity(m * n);
        let mut b = Vec::with_capacity(m);
        for i in 0..m {
            let row = lp.row(i);
            let s = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let s = if s > 0.0 { s } else { 1.0 };
            scale.push(s);
            a.extend(row.iter().map(|v| v / s));
            b.push(lp.upper[i] / s);
        }
        let mut inv = vec![0.0; n * n];
        for j in 0..n {
            inv[j * n + j] = -1.0;
        }
        let mut is_active = vec![false; m + n];
        is_active[m..].iter_mut().for_each(|v| *v = true);
        Self {
            lp,
            opts: *opts,
            n,
            m,
            scale,
            a,
            b,
            c: lp.objective.clone(),
            active: (m..m + n).collect(),
            is_active,
            inv,
            w: vec![0.0; n],
            aw: vec![0.0; m],
            trace: Vec::new(),
        }
    }

    #[inline]
    fn normal_dot(&self, k: usize, v: &[f64]) -> f64 {
        if k < self.m {
            self.a[k * self.n..(k + 1) * self.n].iter().zip(v).map(|(x, y)| x * y).sum()
        } else {
            -v[k - self.m]
        }
    }

    fn normal(&self, k: usize) -> Vec<f64> {
        if k < self.m {
            self.a[k * self.n..(k + 1) * self.n].to_vec()
        } else {
            let mut e = vec![0.0; self.n];
            e[k - self.m] = -1.0;
            e
        }
    }

    fn rhs(&self, k: usize) -> f64 {
        if k < self.m {
            self.b[k]
        } else {
            0.0
        }
    }

    /// `y = B^{-T} c`.
    fn multipliers(&self) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for (i, ci) in self.c.iter().enumerate() {
            if *ci != 0.0 {
                let row = &self.inv[i * n..(i + 1) * n];
                for (yr, v) in y.iter_mut().zip(row) {
                    *yr += ci * v;
                }
            }
        }
        y
    }

    /// Rebuilds the inverse from the active normals and recomputes `w`.
    fn refactor(&mut self) -> Result<(), LpError> {
        let n = self.n;
        let mut mat = vec![0.0; n * n];
        for (r, &k) in self.active.iter().enumerate() {
            mat[r * n..(r + 1) * n].copy_from_slice(&self.normal(k));
        }
        self.inv = invert(&mat, n).ok_or(LpError::Singular)?;
        let h: Vec<f64> = self.active.iter().map(|&k| self.rhs(k)).collect();
        for i in 0..n {
            self.w[i] = self.inv[i * n..(i + 1) * n].iter().zip(&h).map(|(a, b)| a * b).sum();
        }
        for k in 0..self.m {
            self.aw[k] = self.normal_dot(k, &self.w);
        }
        Ok(())
    }

    fn note(&mut self, line: String) {
        if self.trace.len() == 12 {
            self.trace.remove(0);
        }
        self.trace.push(line);
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        let n = self.n;
        let m = self.m;
        let tol = self.opts.tol;
        let cmax = self.c.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let max_iter = self.opts.max_iterations.unwrap_or(100 * (m + n) + 1000);
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        let mut iterations = 0usize;
        let mut d = vec![0.0; n];
        let mut ad = vec![0.0; m];
        loop {
            let y = self.multipliers();
            let bland = degenerate_run >= self.opts.degenerate_run_before_bland;
            // leaving constraint: negative multiplier
            let dual_tol = 1e-11 * cmax;
            let mut leave: Option<usize> = None;
            for r in 0..n {
                if y[r] < -dual_tol {
                    leave = match leave {
                        None => Some(r),
                        Some(q) => {
                            let better = if bland { self.active[r] < self.active[q] } else { y[r] < y[q] || (y[r] == y[q] && self.active[r] < self.active[q]) };
                            Some(if better { r } else { q })
                        }
                    };
                }
            }
            let Some(r) = leave else {
                return Ok(self.finish(&y, iterations));
            };
            iterations += 1;
            if iterations > max_iter {
                return Err(LpError::Stalled { iterations, trace: self.trace });
            }
            // d = -B^{-1} e_r
            for i in 0..n {
                d[i] = -self.inv[i * n + r];
            }
            let dnorm = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            // ratio test over inactive constraints
            let pivot_tol = 1e-9 * dnorm;
            let mut best: Option<(usize, f64, f64)> = None;
            for k in 0..m + n {
                let gd = self.normal_dot(k, &d);
                if k < m {
                    ad[k] = gd;
                }
                if self.is_active[k] || gd <= pivot_tol {
                    continue;
                }
                let slack = if k < m { (self.b[k] - self.aw[k]).max(0.0) } else { self.w[k - m].max(0.0) };
                let step = slack / gd;
                best = match best {
                    None => Some((k, step, gd)),
                    Some((bk, bs, bg)) => {
                        let tie = (step - bs).abs() <= 1e-12 * (1.0 + bs.abs());
                        if (!tie && step < bs) || (tie && k < bk) {
                            Some((k, step, gd))
                        } else {
                            Some((bk, bs, bg))
                        }
                    }
                };
            }
            let Some((enter, step, gd)) = best else {
                return Err(LpError::Unbounded { constraint: self.active[r] });
            };
            let leaving = self.active[r];
            self.note(format!("it {iterations}: out {leaving} in {enter} step {step:.3e} pivot {gd:.3e} bland {bland}"));
            if step <= tol * 1e-3 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for i in 0..n {
                self.w[i] += step * d[i];
            }
            for (v, g) in self.aw.iter_mut().zip(&ad) {
                *v += step * g;
            }
            // row r of B becomes g_enter: B'^{-1} = B^{-1} - (B^{-1}e_r)(u^T B^{-1})/(g·(-d))
            let g = self.normal(enter);
            let mut z = vec![0.0; n];
            for (i, gi) in g.iter().enumerate() {
                if *gi != 0.0 {
                    let row = &self.inv[i * n..(i + 1) * n];
                    for (zj, v) in z.iter_mut().zip(row) {
                        *zj += gi * v;
                    }
                }
            }
            // z = g^T B^{-1}; u^T B^{-1} = z - e_r^T
            z[r] -= 1.0;
            let denom = gd;
            let col: Vec<f64> = (0..n).map(|i| self.inv[i * n + r]).collect();
            for i in 0..n {
                let ci = col[i] / denom;
                if ci != 0.0 {
                    let row = &mut self.inv[i * n..(i + 1) * n];
                    for (v, zj) in row.iter_mut().zip(&z) {
                        *v += ci * zj;
                    }
                }
            }
            self.is_active[leaving] = false;
            self.is_active[enter] = true;
            self.active[r] = enter;
            since_refactor += 1;
            if since_refactor >= self.opts.refactor_every.max(n / 4) || denom < 1e-7 {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }

    fn finish(&mut self, y: &[f64], iterations: usize) -> LpSolution {
        let _ = self.refactor();
        let w: Vec<f64> = self.w.iter().map(|v| v.max(0.0)).collect();
        let y = if iterations > 0 { self.multipliers() } else { y.to_vec() };
        let mut duals = vec![0.0; self.m];
        let mut active_rows = Vec::new();
        for (r, &k) in self.active.iter().enumerate() {
            if k < self.m {
                duals[k] = y[r].max(0.0) / self.scale[k];
                active_rows.push(k);
            }
        }
        active_rows.sort_unstable();
        let value: f64 = w.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        let dual_obj: f64 = duals.iter().zip(self.lp.upper()).map(|(a, b)| a * b).sum();
        let mut dual_residual = 0.0f64;
        for j in 0..self.n {
            let aty: f64 = (0..self.m).filter(|&i| duals[i] != 0.0).map(|i| self.lp.row(i)[j] * duals[i]).sum();
            dual_residual = dual_residual.max(self.c[j] - aty);
        }
        LpSolution {
            value,
            primal_residual: self.lp.primal_residual(&w),
            weights: w,
            duals,
            active_rows,
            iterations,
            duality_gap: dual_obj - value,
            dual_residual,
        }
    }
}

/// Gauss–Jordan inverse with partial pivoting; `None` if singular.
fn invert(mat: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = mat.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
        let pv = a[piv * n + col];
        if pv.abs() < 1e-13 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        let s = 1.0 / pv;
        for j in 0..n {
            a[col * n + j] *= s;
            inv[col * n + j] *= s;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r * n + j] -= f * a[col * n + j];
                        inv[r * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Best feasible vertex over all `N`-subsets of the `m + N` constraints.
    fn brute_force(lp: &LpInstance) -> f64 {
        let n = lp.cols();
        let m = lp.rows();
        let total = m + n;
        let mut best = f64::NEG_INFINITY;
        let mut subset: Vec<usize> = (0..n).collect();
        loop {
            let mut mat = vec![0.0; n * n];
            let mut rhs = vec![0.0; n];
            for (r, &k) in subset.iter().enumerate() {
                if k < m {
                    mat[r * n..(r + 1) * n].copy_from_slice(lp.row(k));
                    rhs[r] = lp.upper()[k];
                } else {
                    mat[r * n + (k - m)] = 1.0;
                }
            }
            if let Some(x) = solve_dense(&mut mat, &mut rhs, n) {
                if lp.primal_residual(&x) <= 1e-10 {
                    best = best.max(x.iter().zip(lp.objective()).map(|(a, b)| a * b).sum());
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if subset[i] < total - n + i {
                    subset[i] += 1;
                    for j in i + 1..n {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
        for col in 0..n {
            let piv = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs())).unwrap();
            if a[piv * n + col].abs() < 1e-10 {
                return None;
            }
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            b.swap(piv, col);
            for r in col + 1..n {
                let f = a[r * n + col] / a[col * n + col];
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i * n + i];
        }
        Some(x)
    }

    fn random_instance(rng: &mut ChaCha8Rng, cols: usize, rows: usize, signed: bool) -> LpInstance {
        let c: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut lp = LpInstance::new(c).unwrap();
        for _ in 0..rows {
            let row: Vec<f64> = (0..cols).map(|_| if signed { rng.gen_range(-1.0..2.0) } else { rng.gen_range(0.0..2.0) }).collect();
            lp.add_row(&row, rng.gen_range(0.0..3.0)).unwrap();
        }
        // a dense positive row keeps the instance bounded
        lp.add_row(&vec![1.0; cols], 10.0).unwrap();
        lp
    }

    #[test]
    fn tiny_examples() {
        let mut lp = LpInstance::with_unit_objective(1).unwrap();
        lp.add_row(&[1.0], 3.0).unwrap();
        assert!((solve_lp(&lp, 1e-9).unwrap().value - 3.0).abs() < 1e-12);

        let mut lp = LpInstance::with_unit_objective(2).unwrap();
        lp.add_row(&[1.0, 1.0], 1.0).unwrap();
        lp.add_row(&[1.0, 0.0], 0.25).unwrap();
        let a = solve_lp(&lp, 1e-9).unwrap();
        let b = solve_lp(&lp, 1e-9).unwrap();
        assert!((a.value - 1.0).abs() < 1e-12);
        assert_eq!(a, b);
    }

    #[test]
    fn unbounded_and_malformed() {
        let mut lp = LpInstance::with_unit_objective(2).unwrap();
        lp.add_row(&[1.0, 0.0], 1.0).unwrap();
        assert!(matches!(solve_lp(&lp, 1e-9), Err(LpError::Unbounded { .. })));
        assert!(matches!(lp.add_row(&[1.0, 0.0], -1.0), Err(LpError::InfeasibleOrigin { .. })));
        assert!(lp.add_row(&[1.0], 1.0).is_err());
        assert!(LpInstance::new(vec![]).is_err());
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..100 {
            let cols = 1 + case % 8;
            let rows = 1 + (case * 5) % 8;
            let lp = random_instance(&mut rng, cols, rows, case % 3 == 0);
            let sol = solve_lp(&lp, 1e-9).unwrap();
            let oracle = brute_force(&lp);
            assert!((sol.value - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), "case {case}: {} vs {oracle}", sol.value);
        }
    }

    #[test]
    fn optimality_certificate_on_larger_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..20 {
            let lp = random_instance(&mut rng, 20, 50, case % 2 == 0);
            let sol = solve_lp(&lp, 1e-9).unwrap();
            // independent KKT check from the returned primal and dual vectors
            assert!(lp.primal_residual(&sol.weights) < 1e-9);
            assert!(sol.duals.iter().all(|&y| y >= 0.0));
            let value: f64 = sol.weights.iter().zip(lp.objective()).map(|(a, b)| a * b).sum();
            let dual: f64 = sol.duals.iter().zip(lp.upper()).map(|(a, b)| a * b).sum();
            assert!((dual - value).abs() < 1e-8 * (1.0 + value.abs()), "case {case}: gap {}", dual - value);
            for j in 0..lp.cols() {
                let aty: f64 = (0..lp.rows()).map(|i| lp.row(i)[j] * sol.duals[i]).sum();
                assert!(aty >= lp.objective()[j] - 1e-8, "case {case}: column {j}");
            }
            assert!(sol.duality_gap.abs() < 1e-8 && sol.dual_residual < 1e-8);
        }
    }

    #[test]
    fn row_generation_matches_the_full_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for case in 0..20 {
            let lp = random_instance(&mut rng, 15, 60, case % 2 == 0);
            let full = solve_lp(&lp, 1e-9).unwrap();
            let seed: Vec<usize> = (0..lp.rows()).step_by(7).collect();
            let lazy = solve_lp_lazy(&lp, &seed, &SimplexOptions::default()).unwrap();
            assert!((lazy.value - full.value).abs() < 1e-8 * (1.0 + full.value.abs()), "case {case}");
            assert!(lazy.primal_residual < 1e-9);
            assert_eq!(lazy.duals.len(), lp.rows());
            let dual: f64 = lazy.duals.iter().zip(lp.upper()).map(|(a, b)| a * b).sum();
            assert!((dual - lazy.value).abs() < 1e-8 * (1.0 + lazy.value.abs()));
        }
    }

    #[test]
    fn row_generation_recovers_from_an_unbounded_seed() {
        let mut lp = LpInstance::with_unit_objective(2).unwrap();
        lp.add_row(&[1.0, 0.0], 1.0).unwrap();
        lp.add_row(&[0.0, 1.0], 2.0).unwrap();
        let sol = solve_lp_lazy(&lp, &[0], &SimplexOptions::default()).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-12);
        assert!(solve_lp_lazy(&lp, &[5], &SimplexOptions::default()).is_err());
    }

    #[test]
    fn degenerate_instances_terminate() {
        // many identical and zero-bound rows through the origin
        let mut lp = LpInstance::with_unit_objective(4).unwrap();
        for _ in 0..5 {
            lp.add_row(&[1.0, -1.0, 0.0, 0.0], 0.0).unwrap();
            lp.add_row(&[0.0, 1.0, -1.0, 0.0], 0.0).unwrap();
            lp.add_row(&[0.0, 0.0, 1.0, -1.0], 0.0).unwrap();
        }
        lp.add_row(&[1.0, 1.0, 1.0, 1.0], 2.0).unwrap();
        let sol = solve_lp(&lp, 1e-9).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!((sol.value - brute_force(&lp)).abs() < 1e-9);
    }

    #[test]
    fn lp_export_lists_every_row() {
        let mut lp = LpInstance::with_unit_objective(2).unwrap();
        lp.add_row(&[1.0, -0.5], 1.0).unwrap();
        lp.add_row(&[0.0, 0.0], 2.0).unwrap();
        let text = lp.to_lp_format();
        assert!(text.starts_with("\\ exported by fracap\nMaximize"));
        assert!(text.contains(" r0: + 1.00000000000000000e0 w0 - 5.00000000000000000e-1 w1 <= 1.00000000000000000e0"));
        assert!(text.contains(" r1: 0 w0 <= 2"));
        assert!(text.contains(" w1 >= 0") && text.trim_end().ends_with("End"));
    }
}
