//! The fractional heat kernel family: `P_s`, `∇_x P_s`, `∂_t^{1/(2s)} P_s`,
//! the Gaussian `W`, `∇_x W` and `(-Δ)^{1/2} W`.
//!
//! All kernels carry the Fourier normalization: at time `t > 0` the spatial
//! Fourier transform of `P_s(·, t)` is `e^{-4π² t |ξ|^{2s}}`, so `P_1 = W`.

pub mod dtfrac;
pub mod heat;
pub mod profile;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::KernelError;
use crate::psgeo::{ps_dist_raw, PsPoint};

pub use dtfrac::{dt_frac_direct, DtFracTable};
pub use heat::{half_lap_profile_direct, HalfLapProfile};
pub use profile::{phi_profile, profile_quadrature, Profile};

/// Numerical settings for profile quadrature and tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub profile_table_size: usize,
    pub profile_rho_max: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-15, rel_tol: 1e-11, max_panels: 20_000, profile_table_size: 1024, profile_rho_max: 100.0 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(KernelError::InvalidSpec("tolerances must be positive".into()));
        }
        if self.max_panels < 16 {
            return Err(KernelError::InvalidSpec("max_panels must be at least 16".into()));
        }
        if self.profile_table_size < 16 {
            return Err(KernelError::InvalidSpec("profile_table_size must be at least 16".into()));
        }
        if !(self.profile_rho_max > 1.0 && self.profile_rho_max.is_finite()) {
            return Err(KernelError::InvalidSpec("profile_rho_max must be finite and > 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    Ps,
    GradPs,
    DtFracPs,
    W,
    GradW,
    HalfLapW,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub n: usize,
    pub s: f64,
    pub quadrature: QuadratureConfig,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, n: usize, s: f64) -> Self {
        Self { family, n, s, quadrature: QuadratureConfig::default() }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.n == 0 {
            return Err(KernelError::InvalidSpec("n must be at least 1".into()));
        }
        self.quadrature.validate()?;
        match self.family {
            KernelFamily::W | KernelFamily::GradW | KernelFamily::HalfLapW => {
                if self.s != 1.0 {
                    return Err(KernelError::InvalidSpec(format!("{:?} requires s = 1, got {}", self.family, self.s)));
                }
                if self.family == KernelFamily::HalfLapW && self.n != 1 {
                    return Err(KernelError::InvalidSpec("HalfLapW requires n = 1".into()));
                }
            }
            _ => {
                if !(self.s > 0.5 && self.s <= 1.0) {
                    return Err(KernelError::InvalidSpec(format!("s = {} outside (1/2, 1]", self.s)));
                }
            }
        }
        Ok(())
    }

    /// Number of output components.
    pub fn components(&self) -> usize {
        match self.family {
            KernelFamily::GradPs | KernelFamily::GradW => self.n,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Ps(Arc<Profile>),
    GradPs(Arc<Profile>),
    DtFrac(Arc<DtFracTable>),
    W,
    GradW,
    HalfLap(Arc<HalfLapProfile>),
}

/// A ready-to-evaluate kernel. Cheap to clone; tables are shared.
#[derive(Clone, Debug)]
pub struct Kernel {
    spec: KernelSpec,
    inner: Inner,
}

/// Points closer than this to the space-time origin are rejected by the
/// singular kernels.
pub const ORIGIN_EPSILON: f64 = 1e-12;

impl Kernel {
    pub fn build(spec: &KernelSpec) -> Result<Self, KernelError> {
        spec.validate()?;
        let q = &spec.quadrature;
        let inner = match spec.family {
            KernelFamily::Ps => Inner::Ps(profile::shared_profile(spec.n, spec.s, q)?),
            KernelFamily::GradPs => Inner::GradPs(profile::shared_profile(spec.n, spec.s, q)?),
            KernelFamily::DtFracPs => Inner::DtFrac(dtfrac::shared_dt_frac_table(spec.n, spec.s, q)?),
            KernelFamily::W => Inner::W,
            KernelFamily::GradW => Inner::GradW,
            KernelFamily::HalfLapW => Inner::HalfLap(heat::shared_half_lap(q)?),
        };
        Ok(Self { spec: spec.clone(), inner })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.spec.components()
    }

    /// Evaluates at the space-time vector `(x, t)` into `out`
    /// (length [`Kernel::components`]).
    #[inline]
    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), KernelError> {
        if x.len() != self.spec.n {
            return Err(KernelError::DimensionMismatch { expected: self.spec.n, found: x.len() });
        }
        let s = self.spec.s;
        match &self.inner {
            Inner::Ps(p) => out[0] = ps_value(p, x, t, s),
            Inner::GradPs(p) => grad_ps_value(p, x, t, s, out),
            Inner::DtFrac(tab) => {
                if ps_dist_raw(x, t, &vec![0.0; x.len()], 0.0, s) < ORIGIN_EPSILON {
                    return Err(KernelError::Singular("space-time origin".into()));
                }
                out[0] = tab.eval(x, t)?;
            }
            Inner::W => out[0] = heat::heat(x, t),
            Inner::GradW => heat::grad_heat(x, t, out),
            Inner::HalfLap(g) => out[0] = g.kernel(x[0], t),
        }
        Ok(())
    }

    pub fn eval(&self, p: &PsPoint) -> Result<Vec<f64>, KernelError> {
        let mut out = vec![0.0; self.components()];
        self.eval_into(&p.x, p.t, &mut out)?;
        Ok(out)
    }
}

#[inline]
fn ps_value(p: &Profile, x: &[f64], t: f64, s: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let n = x.len() as f64;
    let r = crate::psgeo::euclid(x);
    let scale = t.powf(-0.5 / s);
    scale.powf(n) * p.value(r * scale)
}

#[inline]
fn grad_ps_value(p: &Profile, x: &[f64], t: f64, s: f64, out: &mut [f64]) {
    let r = crate::psgeo::euclid(x);
    if t <= 0.0 || r < 1e-12 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let n = x.len() as f64;
    let scale = t.powf(-0.5 / s);
    let c = -2.0 * PI * scale.powf(n + 2.0) * p.grad_value(r * scale);
    for (o, v) in out.iter_mut().zip(x) {
        *o = c * v;
    }
}

fn check_family(spec: &KernelSpec, family: KernelFamily) -> Result<(), KernelError> {
    if spec.family != family {
        return Err(KernelError::InvalidSpec(format!("expected family {family:?}, got {:?}", spec.family)));
    }
    spec.validate()
}

/// `P_s(x, t) = t^{-n/(2s)} φ_{n,s}(|x| t^{-1/(2s)})` for `t > 0`, else 0.
pub fn ps_kernel(p: &PsPoint, spec: &KernelSpec) -> Result<f64, KernelError> {
    check_family(spec, KernelFamily::Ps)?;
    Ok(Kernel::build(spec)?.eval(p)?[0])
}

/// `∇_x P_s`, zero for `t <= 0` and on the axis `x = 0`.
pub fn grad_ps_kernel(p: &PsPoint, spec: &KernelSpec) -> Result<Vec<f64>, KernelError> {
    check_family(spec, KernelFamily::GradPs)?;
    Kernel::build(spec)?.eval(p)
}

/// `∂_t^{1/(2s)} P_s` at `p` by direct quadrature of the time integral.
pub fn dt_frac_ps_kernel(p: &PsPoint, spec: &KernelSpec) -> Result<f64, KernelError> {
    check_family(spec, KernelFamily::DtFracPs)?;
    let profile = profile::shared_profile(spec.n, spec.s, &spec.quadrature)?;
    dt_frac_direct(&profile, &p.x, p.t, &spec.quadrature)
}

/// Gaussian heat kernel `W`.
pub fn heat_kernel(p: &PsPoint) -> f64 {
    heat::heat(&p.x, p.t)
}

/// `∇_x W`.
pub fn grad_heat_kernel(p: &PsPoint) -> Vec<f64> {
    let mut out = vec![0.0; p.n()];
    heat::grad_heat(&p.x, p.t, &mut out);
    out
}

/// `(-Δ)^{1/2} W (x, t) = t^{-1} g(x t^{-1/2})` in one spatial dimension.
pub fn half_lap_heat_kernel(p: &PsPoint, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    if p.n() != 1 {
        return Err(KernelError::DimensionMismatch { expected: 1, found: p.n() });
    }
    Ok(heat::shared_half_lap(cfg)?.kernel(p.x[0], p.t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_to_infinity, integrate_with_breaks, QuadTol};
    use crate::special::sphere_area;
    use proptest::prelude::*;

    fn kernel(family: KernelFamily, n: usize, s: f64) -> Kernel {
        Kernel::build(&KernelSpec::new(family, n, s)).unwrap()
    }

    fn radial_mass(k: &Kernel, t: f64) -> f64 {
        let n = k.spec().n;
        let s = k.spec().s;
        let mut out = [0.0];
        let mut f = |r: f64| {
            let mut x = vec![0.0; n];
            x[0] = r;
            k.eval_into(&x, t, &mut out).unwrap();
            out[0] * r.powi(n as i32 - 1)
        };
        let scale = t.powf(0.5 / s);
        let tol = QuadTol::new(1e-13, 1e-10);
        let breaks: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|b| b * scale).collect();
        let near = integrate_with_breaks(&mut f, &breaks, tol).unwrap().value;
        let far = integrate_to_infinity(&mut f, 32.0 * scale, 32.0 * scale, tol).unwrap().value;
        sphere_area(n) * (near + far)
    }

    #[test]
    fn unit_mass() {
        for &n in &[1usize, 2] {
            for &s in &[0.6, 0.75, 0.9, 1.0] {
                let k = kernel(KernelFamily::Ps, n, s);
                for &t in &[0.1, 1.0, 10.0] {
                    let m = radial_mass(&k, t);
                    assert!((m - 1.0).abs() < 1e-5, "n={n} s={s} t={t}: {m}");
                }
            }
        }
    }

    #[test]
    fn gaussian_branch_is_the_heat_kernel() {
        let p = kernel(KernelFamily::Ps, 2, 1.0);
        let g = kernel(KernelFamily::GradPs, 2, 1.0);
        for &(x0, x1, t) in &[(0.3, -0.2, 0.5), (2.0, 1.0, 0.1), (0.0, 0.0, 3.0)] {
            let pt = PsPoint::new(vec![x0, x1], t);
            let w = heat_kernel(&pt);
            assert!((p.eval(&pt).unwrap()[0] - w).abs() < 1e-14 * w.max(1e-300));
            let gw = grad_heat_kernel(&pt);
            let gp = g.eval(&pt).unwrap();
            for k in 0..2 {
                assert!((gp[k] - gw[k]).abs() < 1e-13 * (gw[k].abs() + 1e-300));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for &(n, s) in &[(1usize, 0.6), (2, 0.75), (3, 0.9)] {
            let p = kernel(KernelFamily::Ps, n, s);
            let g = kernel(KernelFamily::GradPs, n, s);
            for &t in &[0.05, 1.0] {
                let x: Vec<f64> = (0..n).map(|i| 0.4 - 0.3 * i as f64).collect();
                let grad = g.eval(&PsPoint::new(x.clone(), t)).unwrap();
                for k in 0..n {
                    let h = 1e-5 * t.powf(0.5 / s);
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (p.eval(&PsPoint::new(xp, t)).unwrap()[0] - p.eval(&PsPoint::new(xm, t)).unwrap()[0]) / (2.0 * h);
                    let norm: f64 = grad.iter().map(|v| v.abs()).sum();
                    assert!((fd - grad[k]).abs() < 1e-6 * norm, "n={n} s={s} t={t} k={k}: {fd} vs {}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn gradient_points_inward_and_vanishes_off_support() {
        let g = kernel(KernelFamily::GradPs, 2, 0.7);
        for &(a, b) in &[(0.1, 0.0), (1.0, -2.0), (30.0, 5.0)] {
            let v = g.eval(&PsPoint::new(vec![a, b], 0.5)).unwrap();
            assert!(v[0] * a + v[1] * b < 0.0);
        }
        assert_eq!(g.eval(&PsPoint::new(vec![1.0, 1.0], -0.5)).unwrap(), vec![0.0, 0.0]);
        assert_eq!(g.eval(&PsPoint::new(vec![0.0, 0.0], 0.5)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_sided_envelope() {
        // P_s ≍ t / (t^{1/(2s)} + |x|)^{n+2s} for s < 1
        for &(n, s) in &[(1usize, 0.6), (2, 0.9)] {
            let p = kernel(KernelFamily::Ps, n, s);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..60 {
                let r = f64::powf(10.0, -3.0 + 0.1 * i as f64);
                for &t in &[0.01, 1.0, 100.0] {
                    let mut x = vec![0.0; n];
                    x[0] = r;
                    let v = p.eval(&PsPoint::new(x, t)).unwrap()[0];
                    let env = t / (t.powf(0.5 / s) + r).powf(n as f64 + 2.0 * s);
                    lo = lo.min(v / env);
                    hi = hi.max(v / env);
                }
            }
            assert!(lo > 0.0 && hi / lo < 50.0, "n={n} s={s}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn half_laplacian_kernel_scaling() {
        let cfg = QuadratureConfig::default();
        let g0 = half_lap_heat_kernel(&PsPoint::new(vec![0.0], 1.0), &cfg).unwrap();
        for &t in &[1e-3, 0.01, 0.3, 1.0] {
            let v = half_lap_heat_kernel(&PsPoint::new(vec![0.0], t), &cfg).unwrap();
            assert!((v * t - g0).abs() < 1e-12);
        }
        assert!((g0 - PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn table_and_direct_time_derivative_agree() {
        let spec = KernelSpec::new(KernelFamily::DtFracPs, 1, 0.8);
        let k = Kernel::build(&spec).unwrap();
        for &(x, t) in &[(0.5, -0.2), (0.3, 0.6), (2.0, 0.01)] {
            let p = PsPoint::new(vec![x], t);
            let a = k.eval(&p).unwrap()[0];
            let b = dt_frac_ps_kernel(&p, &spec).unwrap();
            assert!((a - b).abs() < 1e-6 * b.abs());
        }
        assert!(k.eval(&PsPoint::new(vec![0.0], 0.0)).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(Kernel::build(&KernelSpec::new(KernelFamily::Ps, 1, 0.5)).is_err());
        assert!(Kernel::build(&KernelSpec::new(KernelFamily::Ps, 0, 0.7)).is_err());
        assert!(Kernel::build(&KernelSpec::new(KernelFamily::W, 1, 0.7)).is_err());
        assert!(Kernel::build(&KernelSpec::new(KernelFamily::HalfLapW, 2, 1.0)).is_err());
        let spec = KernelSpec::new(KernelFamily::Ps, 2, 0.7);
        assert!(grad_ps_kernel(&PsPoint::new(vec![1.0, 0.0], 1.0), &spec).is_err());
        assert!(ps_kernel(&PsPoint::new(vec![1.0], 1.0), &spec).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parabolic_scaling(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, t in 0.01f64..4.0, lam in 0.1f64..10.0, s in prop::sample::select(vec![0.6, 0.75, 0.9])) {
            let p = kernel(KernelFamily::Ps, 2, s);
            let g = kernel(KernelFamily::GradPs, 2, s);
            let d = kernel(KernelFamily::DtFracPs, 2, s);
            let a = PsPoint::new(vec![x0, x1], t);
            let b = crate::psgeo::dilate(&a, lam, s);
            let pa = p.eval(&a).unwrap()[0];
            let pb = p.eval(&b).unwrap()[0];
            prop_assert!((pb * lam.powi(2) / pa - 1.0).abs() < 1e-9);
            let ga = g.eval(&a).unwrap();
            let gb = g.eval(&b).unwrap();
            for k in 0..2 {
                prop_assert!((gb[k] * lam.powi(3) - ga[k]).abs() < 1e-9 * (ga[0].abs() + ga[1].abs()));
            }
            let tb = PsPoint::new(b.x.clone(), -b.t);
            let ta = PsPoint::new(a.x.clone(), -a.t);
            let da = d.eval(&ta).unwrap()[0];
            let db = d.eval(&tb).unwrap()[0];
            prop_assert!((db * lam.powi(3) / da - 1.0).abs() < 1e-9);
        }
    }
}
