//! The Gaussian heat kernel `W`, its gradient, and `(-Δ)^{1/2} W` in one
//! spatial dimension.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::KernelError;
use crate::interp::{EndCondition, UniformSpline};
use crate::kernels::QuadratureConfig;
use crate::quad::{integrate, integrate_with_breaks, QuadTol};

/// `(4πt)^{-n/2} e^{-|x|²/(4t)}` for `t > 0`, else 0.
#[inline]
pub fn heat(x: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * PI * t).powf(-0.5 * x.len() as f64) * (-r2 / (4.0 * t)).exp()
}

/// `∇_x W = -(x / 2t) W`, written into `out`.
#[inline]
pub fn grad_heat(x: &[f64], t: f64, out: &mut [f64]) {
    let w = heat(x, t);
    for (o, v) in out.iter_mut().zip(x) {
        *o = if w == 0.0 { 0.0 } else { -v / (2.0 * t) * w };
    }
}

#[inline]
fn bump(z: f64) -> f64 {
    (-0.25 * z * z).exp()
}

/// `f(z+y) + f(z-y) - 2 f(z)` over `y²` for `f(z) = e^{-z²/4}`, with the
/// Taylor form below `y = 2e-3` where the difference cancels.
fn second_difference(z: f64, y: f64) -> f64 {
    if y < 2e-3 {
        let f = bump(z);
        let z2 = z * z;
        let d2 = (0.25 * z2 - 0.5) * f;
        let d4 = (z2 * z2 / 16.0 - 0.75 * z2 + 0.75) * f;
        let d6 = (z2 * z2 * z2 / 64.0 - 15.0 * z2 * z2 / 32.0 + 45.0 * z2 / 16.0 - 15.0 / 8.0) * f;
        let y2 = y * y;
        return d2 + d4 * y2 / 12.0 + d6 * y2 * y2 / 360.0;
    }
    (bump(z + y) + bump(z - y) - 2.0 * bump(z)) / (y * y)
}

/// `g(z) = PV ∫ (f(z) - f(z-y)) / y² dy` for `f(z) = e^{-z²/4}`, by direct
/// quadrature.
pub fn half_lap_profile_direct(z: f64, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    let z = z.abs();
    let tol = QuadTol::new(cfg.abs_tol, cfg.rel_tol).with_max_intervals(cfg.max_panels);
    // ∫_0^1 of -(second difference)
    let inner = integrate(|y| -second_difference(z, y), 0.0, 1.0, tol)?.value;
    // ∫_1^∞ (2f(z) - f(z+y) - f(z-y)) / y²
    let far = (z + 1.0).max(1.0) + 40.0;
    let mut breaks = vec![1.0];
    for d in [-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0] {
        let b = z + d;
        if b > 1.0 && b < far {
            breaks.push(b);
        }
    }
    breaks.push(far);
    breaks.sort_by(f64::total_cmp);
    let bumps = integrate_with_breaks(|y| (bump(z + y) + bump(z - y)) / (y * y), &breaks, tol)?.value;
    let f = bump(z);
    // beyond `far` the bumps are below e^{-400}
    Ok(inner + 2.0 * f - bumps)
}

/// `∫_0^∞ (1 - e^{-r²}) / r² dr` by the same singular quadrature, with
/// `f(z) = e^{-z²/4}` rescaled to `r = y/2`.
pub fn half_lap_anchor_integral(cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    half_lap_profile_direct(0.0, cfg)
}

/// Large-`z` expansion `g(z) ≈ -2√π z^{-2} (1 + 6 z^{-2} + 60 z^{-4} + 840 z^{-6})`.
pub fn half_lap_profile_asymptotic(z: f64) -> f64 {
    let u = 1.0 / (z * z);
    -2.0 * PI.sqrt() * u * (1.0 + u * (6.0 + u * (60.0 + 840.0 * u)))
}

const HALF_LAP_Z_MAX: f64 = 40.0;
const HALF_LAP_STEP: f64 = 0.01;

/// Spline table of `g` on `[0, 40]` with the asymptotic tail beyond.
#[derive(Clone, Debug)]
pub struct HalfLapProfile {
    spline: UniformSpline,
    tail_scale: f64,
}

impl HalfLapProfile {
    pub fn build(cfg: &QuadratureConfig) -> Result<Self, KernelError> {
        let count = (HALF_LAP_Z_MAX / HALF_LAP_STEP).round() as usize;
        let mut y = Vec::with_capacity(count + 1);
        for i in 0..=count {
            y.push(half_lap_profile_direct(i as f64 * HALF_LAP_STEP, cfg)?);
        }
        let edge = *y.last().unwrap();
        let tail_scale = edge / half_lap_profile_asymptotic(HALF_LAP_Z_MAX);
        let zm = HALF_LAP_Z_MAX;
        let slope = tail_scale * 4.0 * PI.sqrt() * (zm.powi(-3) + 12.0 * zm.powi(-5) + 180.0 * zm.powi(-7) + 3360.0 * zm.powi(-9));
        let spline = UniformSpline::new(0.0, HALF_LAP_STEP, y, EndCondition::Clamped(0.0), EndCondition::Clamped(slope));
        Ok(Self { spline, tail_scale })
    }

    /// `g(z)`, even in `z`.
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        let z = z.abs();
        if z >= HALF_LAP_Z_MAX {
            return self.tail_scale * half_lap_profile_asymptotic(z);
        }
        self.spline.eval(z)
    }

    /// `g(0)`.
    pub fn at_origin(&self) -> f64 {
        self.spline.nodes()[0]
    }

    /// `t^{-1} g(x t^{-1/2})` for `t > 0`, else 0.
    #[inline]
    pub fn kernel(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.value(x / t.sqrt()) / t
    }
}

/// Process-wide table of `g` for the given configuration.
pub fn shared_half_lap(cfg: &QuadratureConfig) -> Result<Arc<HalfLapProfile>, KernelError> {
    type Cache = Mutex<Vec<(QuadratureConfig, Arc<HalfLapProfile>)>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, p)) = guard.iter().find(|(c, _)| c == cfg) {
        return Ok(Arc::clone(p));
    }
    let p = Arc::new(HalfLapProfile::build(cfg)?);
    guard.push((*cfg, Arc::clone(&p)));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dawson's integral `D(x) = ∫_0^x e^{t² - x²} dt`.
    fn dawson(x: f64) -> f64 {
        integrate(|t| (t * t - x * x).exp(), 0.0, x, QuadTol::new(1e-17, 1e-14)).unwrap().value
    }

    /// `g(z) = √π (1 - z D(z/2))`.
    fn g_oracle(z: f64) -> f64 {
        PI.sqrt() * (1.0 - z * dawson(0.5 * z))
    }

    #[test]
    fn direct_quadrature_matches_dawson_form() {
        let cfg = QuadratureConfig::default();
        for i in 0..60 {
            let z = 0.37 * f64::from(i);
            let d = half_lap_profile_direct(z, &cfg).unwrap();
            assert!((d - g_oracle(z)).abs() < 1e-10, "z={z}: {d} vs {}", g_oracle(z));
        }
    }

    #[test]
    fn anchor_is_sqrt_pi() {
        let v = half_lap_anchor_integral(&QuadratureConfig::default()).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn table_matches_oracle_including_tail() {
        let g = HalfLapProfile::build(&QuadratureConfig::default()).unwrap();
        for i in 0..400 {
            let z = 0.1237 * f64::from(i);
            assert!((g.value(z) - g_oracle(z)).abs() < 1e-9, "z={z}");
            assert_eq!(g.value(z), g.value(-z));
        }
        let cfg = QuadratureConfig::default();
        for &z in &[45.0, 80.0, 300.0] {
            let rel = g.value(z) / half_lap_profile_direct(z, &cfg).unwrap() - 1.0;
            assert!(rel.abs() < 1e-7, "z={z}: {rel}");
        }
    }

    #[test]
    fn heat_gradient_matches_finite_differences() {
        let x = [0.3, -0.7];
        let t = 0.4;
        let mut g = [0.0; 2];
        grad_heat(&x, t, &mut g);
        for k in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (heat(&xp, t) - heat(&xm, t)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8 * g[k].abs().max(1e-3));
        }
        grad_heat(&[0.0, 0.0], 1.0, &mut g);
        assert_eq!(g, [0.0, 0.0]);
        assert_eq!(heat(&x, 0.0), 0.0);
        assert_eq!(heat(&x, -1.0), 0.0);
    }
}
