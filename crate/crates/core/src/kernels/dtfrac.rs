//! `∂_t^{1/(2s)} P_s(x, t) = ∫ (P_s(x,τ) - P_s(x,t)) / |τ - t|^{1 + 1/(2s)} dτ`.
//!
//! The integral is homogeneous: `D(λx, λ^{2s}t) = λ^{-(n+1)} D(x, t)`, so
//! `D(x, t) = |x|^{-(n+1)} F(t / |x|^{2s})` and [`DtFracTable`] tabulates `F`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{KernelError, QuadError};
use crate::interp::{EndCondition, UniformSpline};
use crate::kernels::profile::{shared_profile, Profile};
use crate::kernels::QuadratureConfig;
use crate::psgeo::euclid;
use crate::quad::{integrate_left_singular, integrate_to_infinity, integrate_with_breaks, QuadTol};

/// Half-width of the inner window, relative to `|t|`.
const WINDOW: f64 = 1e-3;

struct Setup<'a> {
    profile: &'a Profile,
    r: f64,
    alpha: f64,
    n: i32,
}

impl Setup<'_> {
    /// `P_s(x, τ)` with `|x| = r`.
    #[inline]
    fn p(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let scale = tau.powf(-self.alpha);
        scale.powi(self.n) * self.profile.value(self.r * scale)
    }
}

/// `from + first·2^k` for `k >= 0`, below `to`.
fn geometric_breaks(from: f64, to: f64, first: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut d = first;
    while from + d < to {
        out.push(from + d);
        d *= 2.0;
    }
    out
}

fn sorted(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|x| *x > lo && *x < hi);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Direct evaluation of `∂_t^{1/(2s)} P_s(x, t)`.
///
/// Errors at the space-time origin and, for `n >= 2`, on the axis `x = 0`
/// where the integral diverges.
pub fn dt_frac_direct(profile: &Profile, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    let n = profile.n();
    if x.len() != n {
        return Err(KernelError::DimensionMismatch { expected: n, found: x.len() });
    }
    let s = profile.s();
    let r = euclid(x);
    let alpha = 0.5 / s;
    let beta = n as f64 * alpha;
    let rs = r.powf(2.0 * s);
    let sigma = t.abs().max(rs);
    if sigma.powf(alpha) < super::ORIGIN_EPSILON {
        return Err(KernelError::Singular("space-time origin".into()));
    }
    if r == 0.0 && beta >= 1.0 {
        return Err(KernelError::Singular(format!("the time derivative diverges on the axis x = 0 for n = {n}")));
    }
    let st = Setup { profile, r, alpha, n: n as i32 };
    // singular exponent of P_s(x, τ) at τ = 0+
    let p_exponent = if r == 0.0 { beta } else { 0.0 };
    let scale_abs = cfg.abs_tol * sigma.powf(-beta - alpha);
    let tol = QuadTol::new(scale_abs, cfg.rel_tol).with_max_intervals(cfg.max_panels);

    let kernel_breaks = |lo: f64, hi: f64| -> Vec<f64> {
        let mut b = Vec::new();
        if r > 0.0 {
            for j in -4..=4 {
                b.push(rs * 4f64.powi(j));
            }
        }
        sorted(b, lo, hi)
    };

    // ∫_a^∞ P(τ) w(τ) dτ for a smooth weight, with a finite part then a mapped tail
    let far_integral = |a: f64, weight: &dyn Fn(f64) -> f64| -> Result<f64, KernelError> {
        let top = 64.0 * a.max(rs).max(t.abs());
        let mut b = kernel_breaks(a, top);
        b.extend(geometric_breaks(0.0, top, 2.0 * a));
        let b = sorted(b, a, top);
        let mid = integrate_with_breaks(|tau| st.p(tau) * weight(tau), &b, tol)?.value;
        let tail = integrate_to_infinity(|tau| st.p(tau) * weight(tau), top, top, tol)?.value;
        Ok(mid + tail)
    };

    if t <= 0.0 {
        let a = t.abs();
        let w = |tau: f64| (tau + a).powf(-1.0 - alpha);
        // near τ = 0 the integrand behaves like τ^{-p_exponent} (t < 0) or τ^{-α} (t = 0, x ≠ 0)
        let edge_exp = if t == 0.0 { alpha } else { p_exponent };
        let c = 0.25 * if t == 0.0 { rs } else if r > 0.0 { a.min(rs) } else { a };
        let near = integrate_left_singular(|tau| st.p(tau) * w(tau), 0.0, c, edge_exp, tol)?.value;
        return Ok(near + far_integral(c, &w)?);
    }

    // t > 0: symmetric window of half-width t around t, split at h0
    let h0 = WINDOW * t;
    let pt = st.p(t);
    let q = |u: f64| (st.p(t + u) + st.p(t - u) - 2.0 * pt) / (u * u);
    let (q1, q2) = (q(h0), q(0.5 * h0));
    let q0 = (4.0 * q2 - q1) / 3.0;
    let qq = (q1 - q2) / (0.75 * h0 * h0);
    let inner = q0 * h0.powf(2.0 - alpha) / (2.0 - alpha) + qq * h0.powf(4.0 - alpha) / (4.0 - alpha);

    let sym = |u: f64| (st.p(t + u) + st.p(t - u) - 2.0 * pt) * u.powf(-1.0 - alpha);
    // rounding in the second difference integrates to about ε P(t) h0^{-α} / α
    let floor = 64.0 * f64::EPSILON * pt * h0.powf(-alpha) / alpha;
    let tol = QuadTol::new(scale_abs.max(floor), cfg.rel_tol).with_max_intervals(cfg.max_panels);
    let mut b = geometric_breaks(h0, 0.5 * t, h0);
    for k in kernel_breaks(0.0, 2.0 * t) {
        let u = (k - t).abs();
        if u > h0 && u < 0.5 * t {
            b.push(u);
        }
    }
    let b = sorted(b, h0, 0.5 * t);
    let middle = integrate_with_breaks(sym, &b, tol)?.value;
    // u ∈ [t/2, t]: P(t - u) may be singular as u -> t; integrate in w = t - u
    let sym_w = |w: f64| (st.p(2.0 * t - w) + st.p(w) - 2.0 * pt) * (t - w).powf(-1.0 - alpha);
    let mut end = 0.0;
    let wb = kernel_breaks(0.0, 0.5 * t);
    for pair in wb.windows(2) {
        end += if pair[0] == 0.0 {
            integrate_left_singular(sym_w, pair[0], pair[1], p_exponent, tol)?.value
        } else {
            integrate_with_breaks(sym_w, pair, tol)?.value
        };
    }
    let far = far_integral(2.0 * t, &|tau: f64| (tau - t).powf(-1.0 - alpha))?;
    Ok(inner + middle + end + far - 2.0 * pt * t.powf(-alpha) / alpha)
}

/// [`dt_frac_direct`], retried at 100x looser tolerances when the requested
/// accuracy is out of reach, which happens far out in `|θ|`.
fn direct_for_table(profile: &Profile, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    match dt_frac_direct(profile, x, t, cfg) {
        Err(KernelError::Quadrature(QuadError::NoConvergence { .. })) => {
            let loose = QuadratureConfig { abs_tol: 100.0 * cfg.abs_tol, rel_tol: 100.0 * cfg.rel_tol, ..*cfg };
            dt_frac_direct(profile, x, t, &loose)
        }
        other => other,
    }
}

/// Tables reach `|θ| = e^{14}`.
const TABLE_LOG_THETA_MAX: f64 = 14.0;
const TABLE_SIDE_NODES: usize = 2001;

/// Tabulated `∂_t^{1/(2s)} P_s` through its homogeneity.
///
/// `F(θ)` has a `|θ|^{1-α}` cusp on either side of `θ = 0` and decays like
/// `|θ|^{-γ}`, so each side stores `H(c) = F(θ) (1 + θ²)^{γ/2}` on a uniform
/// grid in `c = asinh(|θ|^{1-α})`. Beyond the grid `H` is held at its edge
/// value.
#[derive(Clone, Debug)]
pub struct DtFracTable {
    n: usize,
    s: f64,
    alpha: f64,
    gamma: f64,
    c_max: f64,
    positive: UniformSpline,
    negative: UniformSpline,
    axis: Option<(f64, f64)>,
}

impl DtFracTable {
    pub fn build(profile: &Profile, cfg: &QuadratureConfig) -> Result<Self, KernelError> {
        let n = profile.n();
        let s = profile.s();
        let alpha = 0.5 / s;
        let gamma = if (n as f64) * alpha < 1.0 { (n as f64 + 1.0) * alpha } else { 1.0 + alpha };
        let c_max = ((1.0 - alpha) * TABLE_LOG_THETA_MAX).exp().asinh();
        let h = c_max / (TABLE_SIDE_NODES - 1) as f64;
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let at_zero = dt_frac_direct(profile, &x, 0.0, cfg)?;
        let side = |sign: f64| -> Result<UniformSpline, KernelError> {
            let mut y = Vec::with_capacity(TABLE_SIDE_NODES);
            y.push(at_zero);
            for i in 1..TABLE_SIDE_NODES {
                let theta = (i as f64 * h).sinh().powf(1.0 / (1.0 - alpha));
                y.push(direct_for_table(profile, &x, sign * theta, cfg)? * (1.0 + theta * theta).powf(0.5 * gamma));
            }
            Ok(UniformSpline::new(0.0, h, y, EndCondition::NotAKnot, EndCondition::Natural))
        };
        let positive = side(1.0)?;
        let negative = side(-1.0)?;
        let axis = if (n as f64) * alpha < 1.0 {
            let zero = vec![0.0; n];
            Some((dt_frac_direct(profile, &zero, 1.0, cfg)?, dt_frac_direct(profile, &zero, -1.0, cfg)?))
        } else {
            None
        };
        Ok(Self { n, s, alpha, gamma, c_max, positive, negative, axis })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `D(x, t)`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64, KernelError> {
        let r = euclid(x);
        let two_s = 2.0 * self.s;
        if r == 0.0 {
            let Some((plus, minus)) = self.axis else {
                return Err(KernelError::Singular("the time derivative diverges on the axis x = 0".into()));
            };
            if t == 0.0 {
                return Err(KernelError::Singular("space-time origin".into()));
            }
            let c = if t > 0.0 { plus } else { minus };
            return Ok(c * t.abs().powf(-(self.n as f64 + 1.0) / two_s));
        }
        let theta = t / r.powf(two_s);
        let c = theta.abs().powf(1.0 - self.alpha).asinh().min(self.c_max);
        let spline = if theta >= 0.0 { &self.positive } else { &self.negative };
        let f = spline.eval(c) * (1.0 + theta * theta).powf(-0.5 * self.gamma);
        Ok(r.powf(-(self.n as f64 + 1.0)) * f)
    }
}

/// Process-wide table for `(n, s, cfg)`.
pub fn shared_dt_frac_table(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<Arc<DtFracTable>, KernelError> {
    type Key = (usize, u64, [u64; 5]);
    type Cache = Mutex<HashMap<Key, Arc<DtFracTable>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (
        n,
        s.to_bits(),
        [cfg.abs_tol.to_bits(), cfg.rel_tol.to_bits(), cfg.max_panels as u64, cfg.profile_table_size as u64, cfg.profile_rho_max.to_bits()],
    );
    let profile = shared_profile(n, s, cfg)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.get(&key) {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(DtFracTable::build(&profile, cfg)?);
    guard.insert(key, Arc::clone(&table));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn homogeneity_of_degree_minus_n_plus_one() {
        for &(n, s) in &[(1usize, 0.6), (1, 0.75), (2, 0.9), (3, 0.8)] {
            let p = shared_profile(n, s, &cfg()).unwrap();
            for (k, &t) in [-2.0, -0.3, 0.0, 0.01, 0.4, 5.0].iter().enumerate() {
                let x: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * (i + k) as f64).collect();
                let d = dt_frac_direct(&p, &x, t, &cfg()).unwrap();
                for &lam in &[0.3, 2.5] {
                    let xl: Vec<f64> = x.iter().map(|v| lam * v).collect();
                    let dl = dt_frac_direct(&p, &xl, t * f64::powf(lam, 2.0 * s), &cfg()).unwrap();
                    let rel = dl * f64::powi(lam, n as i32 + 1) / d - 1.0;
                    assert!(rel.abs() < 1e-8, "n={n} s={s} t={t} lam={lam}: {rel}");
                }
            }
        }
    }

    #[test]
    fn gaussian_branch_agrees_with_quadrature_profile() {
        let exact = Profile::build(2, 1.0, &cfg()).unwrap();
        let quad = Profile::build_quadrature(2, 1.0, &cfg()).unwrap();
        for &t in &[-1.0, 0.0, 0.05, 0.3, 2.0] {
            let a = dt_frac_direct(&exact, &[0.5, -0.2], t, &cfg()).unwrap();
            let b = dt_frac_direct(&quad, &[0.5, -0.2], t, &cfg()).unwrap();
            assert!((a - b).abs() < 1e-6 * a.abs(), "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn positive_before_the_pole() {
        let p = shared_profile(2, 0.7, &cfg()).unwrap();
        for &t in &[-10.0, -1.0, -1e-3] {
            assert!(dt_frac_direct(&p, &[0.4, 0.1], t, &cfg()).unwrap() > 0.0);
        }
    }

    #[test]
    fn axis_below_the_pole_is_a_beta_integral() {
        // D(0, -a) = φ(0) a^{-2α} B(1 - α, 2α) for n = 1
        for &s in &[0.6, 0.75, 0.9, 1.0] {
            let p = shared_profile(1, s, &cfg()).unwrap();
            let alpha = 0.5 / s;
            let beta = gamma(1.0 - alpha) * gamma(2.0 * alpha) / gamma(1.0 + alpha);
            for &a in &[0.5, 3.0] {
                let expected = p.value(0.0) * f64::powf(a, -2.0 * alpha) * beta;
                let d = dt_frac_direct(&p, &[0.0], -a, &cfg()).unwrap();
                assert!((d / expected - 1.0).abs() < 1e-8, "s={s} a={a}: {d} vs {expected}");
            }
        }
    }

    #[test]
    fn power_on_the_axis_is_annihilated_at_three_quarters() {
        // τ_+^{σ-1} with σ = α/2 is harmonic for the order-α operator on τ > 0
        let p = shared_profile(1, 0.75, &cfg()).unwrap();
        for &t in &[0.2, 1.0, 7.0] {
            let d = dt_frac_direct(&p, &[0.0], t, &cfg()).unwrap();
            let scale = p.value(0.0) * f64::powf(t, -2.0 / 1.5);
            assert!(d.abs() < 1e-9 * scale, "t={t}: {d}");
        }
    }

    #[test]
    fn singular_inputs_are_rejected() {
        let p2 = shared_profile(2, 0.8, &cfg()).unwrap();
        assert!(matches!(dt_frac_direct(&p2, &[0.0, 0.0], 1.0, &cfg()), Err(KernelError::Singular(_))));
        assert!(matches!(dt_frac_direct(&p2, &[0.0, 0.0], 0.0, &cfg()), Err(KernelError::Singular(_))));
        assert!(matches!(dt_frac_direct(&p2, &[0.0], 1.0, &cfg()), Err(KernelError::DimensionMismatch { .. })));
        let tab = shared_dt_frac_table(2, 0.8, &cfg()).unwrap();
        assert!(tab.eval(&[0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for &(n, s) in &[(1usize, 0.75), (2, 0.9), (1, 1.0)] {
            let p = shared_profile(n, s, &cfg()).unwrap();
            let tab = shared_dt_frac_table(n, s, &cfg()).unwrap();
            let alpha = 0.5 / s;
            let gamma = if n as f64 * alpha < 1.0 { (n as f64 + 1.0) * alpha } else { 1.0 + alpha };
            for i in 0..120 {
                let u = -6.0 + 0.1 * i as f64;
                for sign in [-1.0, 1.0] {
                    let theta = sign * f64::powf(10.0, u);
                    let mut x = vec![0.0; n];
                    x[n - 1] = 0.8;
                    let t = theta * f64::powf(0.8, 2.0 * s);
                    let a = tab.eval(&x, t).unwrap();
                    let b = dt_frac_direct(&p, &x, t, &cfg()).unwrap();
                    let weight = f64::powf(0.8, n as f64 + 1.0) * (1.0 + theta * theta).powf(0.5 * gamma);
                    assert!((a - b).abs() * weight < 2e-6, "n={n} s={s} θ={theta}: {a} vs {b}");
                }
            }
            if n == 1 {
                for &t in &[-2.0, 0.5] {
                    let b = dt_frac_direct(&p, &[0.0], t, &cfg()).unwrap();
                    assert!((tab.eval(&[0.0], t).unwrap() - b).abs() < 1e-10 * b.abs().max(1.0));
                }
            }
        }
    }
}
