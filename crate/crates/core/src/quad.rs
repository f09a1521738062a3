//! Globally adaptive Gauss-Kronrod quadrature and compensated summation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::QuadError;

// 21-point Kronrod abscissae; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Stopping rule for the adaptive integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl QuadTol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, max_intervals: 20_000 }
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

impl Default for QuadTol {
    fn default() -> Self {
        Self::new(1e-14, 1e-11)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { at: center });
    }
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite { at: x2 });
        }
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = resk * half;
    resabs *= scale;
    resasc *= scale;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment { a, b, value, error, resabs })
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, using every entry of
/// `breaks` as an initial subdivision point.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: QuadTol,
) -> Result<QuadResult, QuadError> {
    if breaks.len() < 2 {
        return Err(QuadError::EmptyInterval);
    }
    let mut heap = BinaryHeap::new();
    let mut settled: Vec<Segment> = Vec::new();
    let mut evaluations = 0usize;
    for w in breaks.windows(2) {
        if !(w[1] > w[0]) {
            if w[1] == w[0] {
                continue;
            }
            return Err(QuadError::UnorderedBreaks);
        }
        heap.push(gk21(&mut f, w[0], w[1])?);
        evaluations += 21;
    }
    if heap.is_empty() {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0, evaluations: 0 });
    }
    let mut total = compensated_sum(heap.iter().map(|s| s.value));
    let mut total_err: f64 = heap.iter().map(|s| s.error).sum();
    let mut total_abs: f64 = heap.iter().map(|s| s.resabs).sum();
    let mut since_resum = 0usize;
    loop {
        // accuracy below the rounding floor of the integrand is unattainable
        let floor = 100.0 * f64::EPSILON * total_abs;
        let target = tol.abs.max(tol.rel * total.abs()).max(floor);
        if total_err <= target {
            break;
        }
        if heap.len() + settled.len() >= tol.max_intervals {
            let value = compensated_sum(heap.iter().chain(settled.iter()).map(|s| s.value));
            return Err(QuadError::NoConvergence { value, error: total_err, requested: target });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 4.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()) {
            settled.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.resabs + right.resabs - worst.resabs;
        heap.push(left);
        heap.push(right);
        since_resum += 1;
        if since_resum >= 64 {
            since_resum = 0;
            total = compensated_sum(heap.iter().chain(settled.iter()).map(|s| s.value));
            total_err = heap.iter().chain(settled.iter()).map(|s| s.error).sum();
            total_abs = heap.iter().chain(settled.iter()).map(|s| s.resabs).sum();
        }
    }
    let value = compensated_sum(heap.iter().chain(settled.iter()).map(|s| s.value));
    let error = heap.iter().chain(settled.iter()).map(|s| s.error).sum();
    Ok(QuadResult { value, error, intervals: heap.len() + settled.len(), evaluations })
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0, evaluations: 0 });
    }
    if b < a {
        let r = integrate(f, b, a, tol)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    integrate_with_breaks(f, &[a, b], tol)
}

/// Integrates `f` over `[a, inf)` through `x = a + scale * u / (1 - u)`.
///
/// `scale` should be the length on which `f` starts to decay.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    tol: QuadTol,
) -> Result<QuadResult, QuadError> {
    if !(scale > 0.0) {
        return Err(QuadError::EmptyInterval);
    }
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let v = 1.0 - u;
        let x = a + scale * u / v;
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            fx * scale / (v * v)
        }
    };
    integrate_with_breaks(g, &[0.0, 0.5, 0.9, 0.99, 1.0], tol)
}

/// Integrates `f` over `[a, b]` when `f(x)` behaves like `(x - a)^(-beta)` at
/// the left endpoint, with `0 <= beta < 1`.
///
/// The substitution `x = a + (b - a) u^q` with `q = 1 / (1 - beta)` removes the
/// singularity exactly for a pure power.
pub fn integrate_left_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    beta: f64,
    tol: QuadTol,
) -> Result<QuadResult, QuadError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(QuadError::BadExponent { beta });
    }
    if b <= a {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0, evaluations: 0 });
    }
    let q = 1.0 / (1.0 - beta);
    let len = b - a;
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = a + len * u.powf(q);
        if x <= a {
            return 0.0;
        }
        f(x) * len * q * u.powf(q - 1.0)
    };
    integrate_with_breaks(g, &[0.0, 0.25, 0.5, 1.0], tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> QuadTol {
        QuadTol::new(1e-15, 1e-13)
    }

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        for k in 0..=31 {
            let r = integrate(|x| x.powi(k), -1.0, 2.0, tol()).unwrap();
            let exact = (2f64.powi(k + 1) - (-1f64).powi(k + 1)) / f64::from(k + 1);
            assert!((r.value - exact).abs() <= 1e-13 * exact.abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn gauss_embedded_weights_sum_to_two() {
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((g - 2.0).abs() < 1e-15);
        assert!((k - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let r = integrate(f64::sqrt, 0.0, 1.0, tol()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_gaussian_and_power() {
        let r = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1.0, tol()).unwrap();
        assert!((r.value - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-13);
        let r = integrate_to_infinity(|x| x.powf(-2.5), 1.0, 1.0, tol()).unwrap();
        assert!((r.value - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn left_singular_power() {
        let r = integrate_left_singular(|x| x.powf(-0.7) * (1.0 + x), 0.0, 1.0, 0.7, tol()).unwrap();
        let exact = 1.0 / 0.3 + 1.0 / 1.3;
        assert!((r.value - exact).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(f64::cos, 1.0, 0.0, tol()).unwrap();
        assert!((r.value + 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn nonfinite_integrand_is_reported() {
        let e = integrate(|_| f64::NAN, 0.0, 1.0, tol()).unwrap_err();
        assert!(matches!(e, QuadError::NonFinite { .. }));
    }

    #[test]
    fn interval_budget_is_enforced() {
        let t = QuadTol::new(0.0, 0.0).with_max_intervals(8);
        let e = integrate(|x| (1.0 / x.max(1e-300)).sin(), 0.0, 1.0, t).unwrap_err();
        assert!(matches!(e, QuadError::NoConvergence { .. }));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
