//! Radial profiles `φ_m(ρ)` of the inverse Fourier transform of
//! `e^{-4π²|ξ|^{2s}}` in `R^m`.
//!
//! The direct route is a Hankel-type integral
//! `φ_m(ρ) = |S^{m-1}| ∫_0^R e^{-4π² r^{2s}} Λ_{m/2-1}(2πρr) r^{m-1} dr`
//! split into panels between approximate zeros of the Bessel factor. A
//! [`Profile`] stores `φ_n` and `φ_{n+2}` (the latter drives the gradient via
//! `φ_n'(ρ) = -2πρ φ_{n+2}(ρ)`) on a grid uniform in `ln(1+ρ)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::KernelError;
use crate::kernels::QuadratureConfig;
use crate::quad::{integrate_with_breaks, QuadTol};
use crate::special::{gamma, normalized_bessel, sphere_area};

/// Largest dimension `m` for which the Hankel quadrature is implemented.
pub const MAX_QUADRATURE_DIM: usize = 7;

const CUTOFF_EXPONENT: f64 = 80.0;
const GAUSSIAN_TABLE_RHO_MAX: f64 = 10.0;
const CACHE_VERSION: u32 = 1;

fn is_gaussian(s: f64) -> bool {
    s == 1.0
}

fn is_poisson(s: f64) -> bool {
    s == 0.5
}

fn check_s(s: f64) -> Result<(), KernelError> {
    if !(s >= 0.5 && s <= 1.0) {
        return Err(KernelError::InvalidSpec(format!("s = {s} outside [1/2, 1]")));
    }
    Ok(())
}

/// `φ_m(0) = |S^{m-1}| Γ(m/(2s)) / (2s (4π²)^{m/(2s)})`.
pub fn profile_at_origin(m: usize, s: f64) -> f64 {
    let q = m as f64 / (2.0 * s);
    sphere_area(m) * gamma(q) / (2.0 * s * (4.0 * PI * PI).powf(q))
}

/// Closed forms at `s = 1` (Gaussian) and `s = 1/2` (Poisson kernel at height 2π).
pub fn exact_profile(rho: f64, m: usize, s: f64) -> Option<f64> {
    let mf = m as f64;
    if is_gaussian(s) {
        Some((4.0 * PI).powf(-0.5 * mf) * (-0.25 * rho * rho).exp())
    } else if is_poisson(s) {
        let c = gamma(0.5 * (mf + 1.0)) / PI.powf(0.5 * (mf + 1.0));
        let y = 2.0 * PI;
        Some(c * y / (y * y + rho * rho).powf(0.5 * (mf + 1.0)))
    } else {
        None
    }
}

/// Leading terms `(exponent, coefficient)` of the large-`ρ` expansion
/// `φ_m(ρ) ~ Σ_k a_k ρ^{-(m+2sk)}`, `k = 1..=terms`.
pub fn tail_terms(m: usize, s: f64, terms: usize) -> Vec<(f64, f64)> {
    let mf = m as f64;
    let c = (2.0 * PI).powf(2.0 - 2.0 * s);
    let mut out = Vec::with_capacity(terms);
    let mut fact = 1.0;
    for k in 1..=terms {
        let kf = k as f64;
        fact *= kf;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let a = sign / fact * gamma(s * kf + 0.5 * mf) * gamma(1.0 + s * kf) * (PI * s * kf).sin() * 4f64.powf(s * kf)
            / PI.powf(0.5 * mf + 1.0)
            * c.powf(kf);
        out.push((mf + 2.0 * s * kf, a));
    }
    out
}

/// Leading tail constant `A` with `φ_m(ρ) ~ A ρ^{-(m+2s)}`.
pub fn tail_constant(m: usize, s: f64) -> f64 {
    tail_terms(m, s, 1)[0].1
}

fn cutoff_radius(s: f64) -> f64 {
    (CUTOFF_EXPONENT / (4.0 * PI * PI)).powf(0.5 / s)
}

/// `φ_m(ρ)` by direct adaptive quadrature of the Hankel integral.
pub fn profile_quadrature(rho: f64, m: usize, s: f64, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    check_s(s)?;
    if m == 0 || m > MAX_QUADRATURE_DIM {
        return Err(KernelError::Unsupported(format!(
            "Hankel quadrature implemented for 1 <= m <= {MAX_QUADRATURE_DIM}, got m = {m}"
        )));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(KernelError::InvalidSpec(format!("rho = {rho} must be finite and non-negative")));
    }
    let two_nu = m as i32 - 2;
    let nu = f64::from(two_nu) / 2.0;
    let big_r = cutoff_radius(s);
    let k = 2.0 * PI * rho;
    let two_s = 2.0 * s;
    let power = (m - 1) as i32;
    let f = |r: f64| {
        if r <= 0.0 {
            return if m == 1 { 1.0 } else { 0.0 };
        }
        let damp = (-4.0 * PI * PI * r.powf(two_s)).exp();
        damp * normalized_bessel(two_nu, k * r) * r.powi(power)
    };
    let mut breaks = vec![0.0];
    let rc = (4.0 * PI * PI).powf(-0.5 / s);
    for q in [0.25, 0.5, 1.0, 2.0, 4.0] {
        breaks.push(q * rc);
    }
    if k > 0.0 {
        let mut j = 1.0;
        loop {
            let z = (j + 0.5 * nu - 0.25) * PI;
            let r = z / k;
            if r >= big_r {
                break;
            }
            if r > 0.0 {
                breaks.push(r);
            }
            j += 1.0;
        }
    }
    breaks.push(big_r);
    breaks.retain(|r| *r <= big_r);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let area = sphere_area(m);
    let tol = QuadTol::new(cfg.abs_tol / area, cfg.rel_tol).with_max_intervals(cfg.max_panels.max(breaks.len() * 4));
    let r = integrate_with_breaks(f, &breaks, tol)?;
    Ok(area * r.value)
}

#[derive(Clone, Debug, PartialEq)]
enum Tail {
    Power(Vec<(f64, f64)>),
    Gaussian(f64),
}

impl Tail {
    fn fit(m: usize, s: f64, rho_max: f64, edge: f64) -> Tail {
        if is_gaussian(s) {
            return Tail::Gaussian(edge * (0.25 * rho_max * rho_max).exp());
        }
        let mut terms = tail_terms(m, s, 3);
        let rest: f64 = terms[1..].iter().map(|(e, a)| a * rho_max.powf(-e)).sum();
        terms[0].1 = (edge - rest) * rho_max.powf(terms[0].0);
        Tail::Power(terms)
    }

    fn eval(&self, rho: f64) -> f64 {
        match self {
            Tail::Gaussian(a) => a * (-0.25 * rho * rho).exp(),
            Tail::Power(terms) => terms.iter().map(|(e, a)| a * rho.powf(-e)).sum(),
        }
    }

    fn leading(&self) -> f64 {
        match self {
            Tail::Gaussian(a) => *a,
            Tail::Power(terms) => terms[0].1,
        }
    }
}

/// Cubic Hermite table of `ln φ` on a grid uniform in `w = ln(1+ρ)`.
#[derive(Clone, Debug)]
struct LogHermite {
    h: f64,
    ln_v: Vec<f64>,
    slope: Vec<f64>,
    tail: Tail,
    rho_max: f64,
}

impl LogHermite {
    fn new(rho: &[f64], v: &[f64], v_next: &[f64], m: usize, s: f64, rho_max: f64) -> Result<Self, KernelError> {
        let h = (1.0 + rho_max).ln() / (rho.len() - 1) as f64;
        let mut ln_v = Vec::with_capacity(rho.len());
        let mut slope = Vec::with_capacity(rho.len());
        for i in 0..rho.len() {
            if !(v[i] > 0.0) || !(v_next[i] > 0.0) {
                return Err(KernelError::Quadrature(crate::error::QuadError::NonFinite { at: rho[i] }));
            }
            ln_v.push(v[i].ln());
            // d ln φ_m / dw = -2πρ(1+ρ) φ_{m+2} / φ_m
            slope.push(-2.0 * PI * rho[i] * (1.0 + rho[i]) * v_next[i] / v[i]);
        }
        let tail = Tail::fit(m, s, rho_max, *v.last().unwrap());
        Ok(Self { h, ln_v, slope, tail, rho_max })
    }

    #[inline]
    fn eval(&self, rho: f64) -> f64 {
        if rho >= self.rho_max {
            return self.tail.eval(rho);
        }
        let w = rho.ln_1p() / self.h;
        let i = (w as usize).min(self.ln_v.len() - 2);
        let u = w - i as f64;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let y = h00 * self.ln_v[i] + h10 * self.h * self.slope[i] + h01 * self.ln_v[i + 1] + h11 * self.h * self.slope[i + 1];
        y.exp()
    }
}

#[derive(Clone, Debug)]
struct ProfileTable {
    rho: Vec<f64>,
    phi: Vec<f64>,
    phi2: Vec<f64>,
    phi4: Vec<f64>,
    value: LogHermite,
    grad: LogHermite,
}

impl ProfileTable {
    fn from_nodes(n: usize, s: f64, rho_max: f64, rho: Vec<f64>, phi: Vec<f64>, phi2: Vec<f64>, phi4: Vec<f64>) -> Result<Self, KernelError> {
        let value = LogHermite::new(&rho, &phi, &phi2, n, s, rho_max)?;
        let grad = LogHermite::new(&rho, &phi2, &phi4, n + 2, s, rho_max)?;
        Ok(Self { rho, phi, phi2, phi4, value, grad })
    }
}

#[derive(Clone, Debug)]
enum ProfileKind {
    Exact,
    Table(Box<ProfileTable>),
}

/// Evaluator for `φ_n` and `φ_{n+2}` at fixed `(n, s)`.
#[derive(Clone, Debug)]
pub struct Profile {
    n: usize,
    s: f64,
    kind: ProfileKind,
}

impl Profile {
    /// Closed form when `s ∈ {1/2, 1}`, interpolation table otherwise.
    pub fn build(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<Self, KernelError> {
        check_s(s)?;
        if n == 0 {
            return Err(KernelError::InvalidSpec("n must be at least 1".into()));
        }
        if is_gaussian(s) || is_poisson(s) {
            return Ok(Self { n, s, kind: ProfileKind::Exact });
        }
        Self::build_quadrature(n, s, cfg)
    }

    /// Always tabulates by quadrature, also at `s ∈ {1/2, 1}`.
    pub fn build_quadrature(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<Self, KernelError> {
        check_s(s)?;
        cfg.validate()?;
        if n + 4 > MAX_QUADRATURE_DIM {
            return Err(KernelError::Unsupported(format!(
                "tabulated profiles need n <= {}; closed forms cover s = 1 and s = 1/2 for any n",
                MAX_QUADRATURE_DIM - 4
            )));
        }
        let rho_max = table_rho_max(s, cfg);
        let size = cfg.profile_table_size;
        let h = (1.0 + rho_max).ln() / (size - 1) as f64;
        let rho: Vec<f64> = (0..size).map(|i| if i + 1 == size { rho_max } else { (i as f64 * h).exp_m1() }).collect();
        let mut phi = Vec::with_capacity(size);
        let mut phi2 = Vec::with_capacity(size);
        let mut phi4 = Vec::with_capacity(size);
        for &r in &rho {
            phi.push(profile_quadrature(r, n, s, cfg)?);
            phi2.push(profile_quadrature(r, n + 2, s, cfg)?);
            phi4.push(profile_quadrature(r, n + 4, s, cfg)?);
        }
        let table = ProfileTable::from_nodes(n, s, rho_max, rho, phi, phi2, phi4)?;
        Ok(Self { n, s, kind: ProfileKind::Table(Box::new(table)) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, ProfileKind::Exact)
    }

    /// `φ_n(ρ)`.
    #[inline]
    pub fn value(&self, rho: f64) -> f64 {
        match &self.kind {
            ProfileKind::Exact => exact_profile(rho, self.n, self.s).unwrap_or(f64::NAN),
            ProfileKind::Table(t) => t.value.eval(rho),
        }
    }

    /// `φ_{n+2}(ρ)`, so that `φ_n'(ρ) = -2πρ φ_{n+2}(ρ)`.
    #[inline]
    pub fn grad_value(&self, rho: f64) -> f64 {
        match &self.kind {
            ProfileKind::Exact => exact_profile(rho, self.n + 2, self.s).unwrap_or(f64::NAN),
            ProfileKind::Table(t) => t.grad.eval(rho),
        }
    }

    /// `φ_n'(ρ)`.
    pub fn derivative(&self, rho: f64) -> f64 {
        -2.0 * PI * rho * self.grad_value(rho)
    }

    /// Fitted leading tail constant of `φ_n`, if tabulated.
    pub fn fitted_tail_constant(&self) -> Option<f64> {
        match &self.kind {
            ProfileKind::Exact => None,
            ProfileKind::Table(t) => Some(t.value.tail.leading()),
        }
    }

    /// Edge of the interpolation table, if tabulated.
    pub fn rho_max(&self) -> Option<f64> {
        match &self.kind {
            ProfileKind::Exact => None,
            ProfileKind::Table(t) => Some(t.value.rho_max),
        }
    }

    /// Serializes the table nodes as CSV.
    pub fn to_csv(&self, cfg: &QuadratureConfig) -> Option<String> {
        let ProfileKind::Table(t) = &self.kind else { return None };
        let mut out = String::new();
        let _ = writeln!(out, "# fracap profile table v{CACHE_VERSION}");
        let _ = writeln!(out, "# {}", cache_key_line(self.n, self.s, cfg));
        out.push_str("rho,value,grad_profile,grad_profile_next\n");
        for i in 0..t.rho.len() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", t.rho[i], t.phi[i], t.phi2[i], t.phi4[i]);
        }
        Some(out)
    }

    /// Parses a table written by [`Profile::to_csv`], checking its key.
    pub fn from_csv(text: &str, n: usize, s: f64, cfg: &QuadratureConfig, origin: &str) -> Result<Self, KernelError> {
        let bad = |line: usize, msg: &str| KernelError::Cache { path: origin.to_string(), message: format!("line {line}: {msg}") };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == format!("# fracap profile table v{CACHE_VERSION}") => {}
            _ => return Err(bad(1, "missing or unsupported version header")),
        }
        match lines.next() {
            Some((_, l)) if l == format!("# {}", cache_key_line(n, s, cfg)) => {}
            _ => return Err(bad(2, "cache key does not match the requested configuration")),
        }
        match lines.next() {
            Some((_, l)) if l.starts_with("rho,") => {}
            _ => return Err(bad(3, "missing column header")),
        }
        let (mut rho, mut phi, mut phi2, mut phi4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, l) in lines {
            let vals: Result<Vec<f64>, _> = l.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| bad(i + 1, &e.to_string()))?;
            if vals.len() != 4 {
                return Err(bad(i + 1, "expected 4 columns"));
            }
            rho.push(vals[0]);
            phi.push(vals[1]);
            phi2.push(vals[2]);
            phi4.push(vals[3]);
        }
        if rho.len() != cfg.profile_table_size {
            return Err(bad(0, "table size does not match the configuration"));
        }
        let rho_max = table_rho_max(s, cfg);
        let table = ProfileTable::from_nodes(n, s, rho_max, rho, phi, phi2, phi4)?;
        Ok(Self { n, s, kind: ProfileKind::Table(Box::new(table)) })
    }
}

fn table_rho_max(s: f64, cfg: &QuadratureConfig) -> f64 {
    if is_gaussian(s) {
        cfg.profile_rho_max.min(GAUSSIAN_TABLE_RHO_MAX)
    } else {
        cfg.profile_rho_max
    }
}

fn cache_key_line(n: usize, s: f64, cfg: &QuadratureConfig) -> String {
    format!(
        "n={n} s={s:?} abs_tol={:?} rel_tol={:?} max_panels={} size={} rho_max={:?}",
        cfg.abs_tol, cfg.rel_tol, cfg.max_panels, cfg.profile_table_size, cfg.profile_rho_max
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    n: usize,
    s: u64,
    quadrature_only: bool,
    cfg: [u64; 5],
}

impl CacheKey {
    fn new(n: usize, s: f64, cfg: &QuadratureConfig, quadrature_only: bool) -> Self {
        Self {
            n,
            s: s.to_bits(),
            quadrature_only,
            cfg: [
                cfg.abs_tol.to_bits(),
                cfg.rel_tol.to_bits(),
                cfg.max_panels as u64,
                cfg.profile_table_size as u64,
                cfg.profile_rho_max.to_bits(),
            ],
        }
    }

    fn file_name(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for word in std::iter::once(self.n as u64).chain(std::iter::once(self.s)).chain(self.cfg) {
            for b in word.to_le_bytes() {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("profile_n{}_{:016x}.csv", self.n, hash)
    }
}

type ProfileCache = Mutex<HashMap<CacheKey, Arc<Profile>>>;

fn memory_cache() -> &'static ProfileCache {
    static CACHE: OnceLock<ProfileCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Directory named by `FRACAP_CACHE_DIR`, if set and non-empty.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("FRACAP_CACHE_DIR").filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn load_or_build(key: &CacheKey, n: usize, s: f64, cfg: &QuadratureConfig, dir: Option<&Path>) -> Result<Profile, KernelError> {
    let build = || if key.quadrature_only { Profile::build_quadrature(n, s, cfg) } else { Profile::build(n, s, cfg) };
    let exact = !key.quadrature_only && (is_gaussian(s) || is_poisson(s));
    let Some(dir) = dir.filter(|_| !exact) else { return build() };
    let path = dir.join(key.file_name());
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(p) = Profile::from_csv(&text, n, s, cfg, &path.display().to_string()) {
            return Ok(p);
        }
    }
    let profile = build()?;
    if let Some(text) = profile.to_csv(cfg) {
        let io = |e: std::io::Error| KernelError::Cache { path: path.display().to_string(), message: e.to_string() };
        std::fs::create_dir_all(dir).map_err(io)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)?;
    }
    Ok(profile)
}

fn shared(n: usize, s: f64, cfg: &QuadratureConfig, quadrature_only: bool) -> Result<Arc<Profile>, KernelError> {
    let key = CacheKey::new(n, s, cfg, quadrature_only);
    let mut guard = memory_cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = guard.get(&key) {
        return Ok(Arc::clone(p));
    }
    let profile = Arc::new(load_or_build(&key, n, s, cfg, cache_dir().as_deref())?);
    guard.insert(key, Arc::clone(&profile));
    Ok(profile)
}

/// Process-wide shared profile, built on first use and cached on disk when
/// `FRACAP_CACHE_DIR` is set.
pub fn shared_profile(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<Arc<Profile>, KernelError> {
    shared(n, s, cfg, false)
}

/// As [`shared_profile`] but always on the quadrature path.
pub fn shared_quadrature_profile(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<Arc<Profile>, KernelError> {
    shared(n, s, cfg, true)
}

/// `φ_{n,s}(ρ)`.
pub fn phi_profile(rho: f64, n: usize, s: f64, cfg: &QuadratureConfig) -> Result<f64, KernelError> {
    if !(rho >= 0.0) {
        return Err(KernelError::InvalidSpec(format!("rho = {rho} must be non-negative")));
    }
    Ok(shared_profile(n, s, cfg)?.value(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_to_infinity;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn origin_value_matches_fourier_integral() {
        let s = 0.75;
        let r = integrate_to_infinity(|xi| (-4.0 * PI * PI * xi.powf(1.5)).exp(), 0.0, 0.1, QuadTol::new(1e-16, 1e-13)).unwrap();
        let direct = 2.0 * r.value;
        assert!((profile_at_origin(1, s) / direct - 1.0).abs() < 1e-12);
        let q = profile_quadrature(0.0, 1, s, &cfg()).unwrap();
        assert!((q / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_reproduces_closed_forms() {
        for m in 1..=5 {
            for &s in &[1.0, 0.5] {
                let p0 = exact_profile(0.0, m, s).unwrap();
                assert!((profile_at_origin(m, s) / p0 - 1.0).abs() < 1e-12, "m={m} s={s}");
                for i in 0..40 {
                    let rho = 0.05 * (1.25f64).powi(i);
                    if rho > 50.0 {
                        break;
                    }
                    let q = profile_quadrature(rho, m, s, &cfg()).unwrap();
                    let e = exact_profile(rho, m, s).unwrap();
                    assert!((q - e).abs() <= 1e-9 * p0, "m={m} s={s} rho={rho}: {q} vs {e}");
                }
            }
        }
    }

    #[test]
    fn tail_series_matches_quadrature() {
        for &(m, s) in &[(1usize, 0.75), (2, 0.75), (1, 0.6), (3, 0.9)] {
            let terms = tail_terms(m, s, 3);
            for &rho in &[40.0, 80.0] {
                let q = profile_quadrature(rho, m, s, &cfg()).unwrap();
                let a: f64 = terms.iter().map(|(e, a)| a * rho.powf(-e)).sum();
                assert!((q / a - 1.0).abs() < 2e-3, "m={m} s={s} rho={rho}: {q} vs {a}");
            }
        }
    }

    #[test]
    fn tail_constant_is_positive_and_vanishes_at_gaussian() {
        assert!(tail_constant(1, 0.75) > 0.0);
        assert!(tail_constant(2, 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let p = Profile::build(1, 0.75, &cfg()).unwrap();
        let mut rho = 0.0;
        while rho < 150.0 {
            let direct = profile_quadrature(rho, 1, 0.75, &cfg()).unwrap();
            assert!((p.value(rho) / direct - 1.0).abs() < 1e-7, "rho={rho}");
            let direct2 = profile_quadrature(rho, 3, 0.75, &cfg()).unwrap();
            assert!((p.grad_value(rho) / direct2 - 1.0).abs() < 1e-6, "rho={rho}");
            rho += 0.731;
        }
        let fitted = p.fitted_tail_constant().unwrap();
        assert!((fitted / tail_constant(1, 0.75) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let c = QuadratureConfig { profile_table_size: 64, profile_rho_max: 20.0, ..cfg() };
        let p = Profile::build(1, 0.8, &c).unwrap();
        let text = p.to_csv(&c).unwrap();
        let q = Profile::from_csv(&text, 1, 0.8, &c, "mem").unwrap();
        for i in 0..100 {
            let rho = 0.3 * f64::from(i);
            assert_eq!(p.value(rho), q.value(rho));
            assert_eq!(p.grad_value(rho), q.grad_value(rho));
        }
        assert!(Profile::from_csv(&text, 1, 0.81, &c, "mem").is_err());
        let broken = text.replace(",", ";");
        assert!(Profile::from_csv(&broken, 1, 0.8, &c, "mem").is_err());
    }
}
