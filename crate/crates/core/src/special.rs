//! Special functions: gamma wrappers, sphere areas and normalized Bessel functions.

use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Surface area of the unit sphere in `R^m`.
pub fn sphere_area(m: usize) -> f64 {
    assert!(m >= 1, "sphere_area: dimension must be positive");
    let (mut area, mut k) = if m % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    while k < m {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `(J0(z), J1(z))` for `z >= 0`.
pub fn bessel_j01(z: f64) -> (f64, f64) {
    let z = z.abs();
    if z < SERIES_LIMIT {
        (series_lambda(0.0, z), 0.5 * z * series_lambda(1.0, z))
    } else if z < ASYMPTOTIC_LIMIT {
        miller_j01(z)
    } else {
        (hankel_asymptotic(0.0, z), hankel_asymptotic(1.0, z))
    }
}

/// Normalized Bessel function `Γ(ν+1) (2/z)^ν J_ν(z)` with `ν = two_nu / 2`.
///
/// Equals 1 at the origin. Supported for `two_nu` in `-1..=5`.
pub fn normalized_bessel(two_nu: i32, z: f64) -> f64 {
    assert!((-1..=5).contains(&two_nu), "normalized_bessel: two_nu = {two_nu} unsupported");
    let z = z.abs();
    let nu = f64::from(two_nu) / 2.0;
    if z < SERIES_LIMIT {
        return series_lambda(nu, z);
    }
    let (mut lo, mut hi, mut nu_hi) = if two_nu % 2 == 0 {
        let (j0, j1) = bessel_j01(z);
        (j0, 2.0 * j1 / z, 1.0)
    } else {
        (z.cos(), z.sin() / z, 0.5)
    };
    if two_nu <= 0 {
        return lo;
    }
    let z2 = z * z;
    while nu_hi < nu {
        let next = 4.0 * nu_hi * (nu_hi + 1.0) / z2 * (hi - lo);
        lo = hi;
        hi = next;
        nu_hi += 1.0;
    }
    hi
}

fn series_lambda(nu: f64, z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn miller_j01(z: f64) -> (f64, f64) {
    let mut top = z as usize + 40;
    if top % 2 == 1 {
        top += 1;
    }
    let mut above = 0.0;
    let mut cur = 1.0;
    let mut even_sum = 2.0 * cur;
    let mut v1 = 0.0;
    for k in (1..=top).rev() {
        let below = 2.0 * k as f64 / z * cur - above;
        above = cur;
        cur = below;
        let idx = k - 1;
        if idx == 1 {
            v1 = cur;
        }
        if idx >= 2 && idx % 2 == 0 {
            even_sum += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            even_sum *= 1e-250;
            v1 *= 1e-250;
        }
    }
    let norm = cur + even_sum;
    (cur / norm, v1 / norm)
}

fn hankel_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        let term = a / z.powi(k);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
        let kk = (k + 1) as f64;
        a *= (mu - (2.0 * kk - 1.0).powi(2)) / (8.0 * kk);
    }
    let chi = z - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}
