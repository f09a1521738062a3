//! Corner-free s-parabolic Cantor sets `E_{k,p_s}` and their natural
//! probability measures.
//!
//! Each generation-`k` cube of side `ℓ_{k-1}` keeps `δ` equispaced spatial
//! intervals of length `λ_k ℓ_{k-1}` per axis and `δ + 1` equispaced time
//! intervals of length `(λ_k ℓ_{k-1})^{2s}`, so it spawns `(δ+1)δ^n`
//! children. Children are indexed by base-`(δ+1)δ^n` digits, most significant
//! digit first; within a digit the spatial indices come first
//! (lexicographically, axis 0 most significant) and the time index last.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::CantorError;
use crate::measures::DiscreteMeasure;
use crate::psgeo::{validate_s, PsCube, PsPoint};
use crate::quad::CompensatedSum;

/// Smallest integer `δ >= 2` with `δ + 1 < δ^{2s}`.
pub fn nonself_delta(s: f64) -> Result<u32, CantorError> {
    validate_s(s).map_err(|e| CantorError::InvalidParameter(e.to_string()))?;
    (2u32..=u32::MAX).find(|&d| admissible_delta(d, s)).ok_or(CantorError::InvalidParameter(format!("no delta for s = {s}")))
}

fn admissible_delta(delta: u32, s: f64) -> bool {
    let d = f64::from(delta);
    (d + 1.0).ln() < 2.0 * s * d.ln()
}

/// `((δ+1)δ^n)^{-1/(n+1)}`.
pub fn critical_lambda(n: usize, delta: u32) -> f64 {
    let c = children_per_cube(n, delta) as f64;
    c.powf(-1.0 / (n as f64 + 1.0))
}

/// `(δ+1)δ^n`.
pub fn children_per_cube(n: usize, delta: u32) -> u64 {
    u64::from(delta + 1) * u64::from(delta).pow(n as u32)
}

/// Exponent `e` with `#E_k · ℓ_k^{n+1} = ((δ+1)δ^n)^e` for the critical
/// choice of every `λ_j`, computed in rational arithmetic.
pub fn criticality_exponent(n: usize, k: u32) -> Ratio<i64> {
    let count = Ratio::from_integer(i64::from(k));
    let lambda = Ratio::new(-1, n as i64 + 1);
    let side = lambda * i64::from(k);
    count + side * (n as i64 + 1)
}

/// Where the atom of each generation cube sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomPlacement {
    Center,
    MinCorner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    pub n: usize,
    pub s: f64,
    pub delta: u32,
    /// `λ_k` for `k = 1..=depth`.
    pub lambdas: Vec<f64>,
    pub depth: usize,
}

/// A generation cube: `index` runs over `1..=((δ+1)δ^n)^generation`.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorCube {
    pub generation: usize,
    pub index: u128,
    pub cube: PsCube,
}

impl CantorSpec {
    pub fn new(n: usize, s: f64, delta: u32, lambdas: Vec<f64>, depth: usize) -> Result<Self, CantorError> {
        let spec = Self { n, s, delta, lambdas, depth };
        spec.validate()?;
        Ok(spec)
    }

    /// `δ = δ(s)` and the critical `λ` at every generation.
    pub fn critical(n: usize, s: f64, depth: usize) -> Result<Self, CantorError> {
        let delta = nonself_delta(s)?;
        Self::new(n, s, delta, vec![critical_lambda(n, delta); depth], depth)
    }

    pub fn validate(&self) -> Result<(), CantorError> {
        if self.n == 0 {
            return Err(CantorError::InvalidParameter("n must be at least 1".into()));
        }
        validate_s(self.s).map_err(|e| CantorError::InvalidParameter(e.to_string()))?;
        if self.delta < 2 || !admissible_delta(self.delta, self.s) {
            return Err(CantorError::NotNonSelfSimilar { delta: self.delta, s: self.s });
        }
        if self.lambdas.len() < self.depth {
            return Err(CantorError::InvalidParameter(format!("{} ratios for depth {}", self.lambdas.len(), self.depth)));
        }
        if children_per_cube(self.n, self.delta).checked_pow(self.depth as u32).is_none() {
            return Err(CantorError::InvalidParameter(format!("depth {} overflows the cube index", self.depth)));
        }
        for (k, &lambda) in self.lambdas.iter().enumerate().take(self.depth) {
            let d = f64::from(self.delta);
            let temporal_gap = 1.0 - (d + 1.0) * lambda.powf(2.0 * self.s);
            if !(lambda > 0.0 && lambda * d < 1.0 && temporal_gap > 0.0) {
                return Err(CantorError::NoGap { generation: k + 1, lambda });
            }
        }
        Ok(())
    }

    pub fn children(&self) -> u64 {
        children_per_cube(self.n, self.delta)
    }

    /// Number of generation-`k` cubes.
    pub fn count(&self, k: usize) -> u128 {
        u128::from(self.children()).pow(k as u32)
    }

    /// `ℓ_k = λ_1 ⋯ λ_k`.
    pub fn side(&self, k: usize) -> f64 {
        self.lambdas[..k].iter().product()
    }

    /// Spatial gap `l_δ` between sibling intervals, relative to the parent side.
    pub fn spatial_gap(&self, generation: usize) -> f64 {
        let d = f64::from(self.delta);
        (1.0 - d * self.lambdas[generation - 1]) / (d - 1.0)
    }

    /// Temporal gap `l̃_δ`, relative to the parent time side.
    pub fn temporal_gap(&self, generation: usize) -> f64 {
        let d = f64::from(self.delta);
        (1.0 - (d + 1.0) * self.lambdas[generation - 1].powf(2.0 * self.s)) / d
    }

    /// Lower bound on the ps-distance between siblings of `generation`.
    pub fn sibling_separation(&self, generation: usize) -> f64 {
        let parent = self.side(generation - 1);
        self.spatial_gap(generation).min(self.temporal_gap(generation).powf(0.5 / self.s)) * parent
    }

    fn check_generation(&self, k: usize) -> Result<(), CantorError> {
        if k > self.depth {
            return Err(CantorError::InvalidParameter(format!("generation {k} exceeds depth {}", self.depth)));
        }
        Ok(())
    }

    /// Per-generation spatial and temporal steps between sibling corners.
    fn steps(&self, g: usize) -> (f64, f64) {
        let parent = self.side(g - 1);
        let lambda = self.lambdas[g - 1];
        let step_x = parent * (lambda + self.spatial_gap(g));
        let step_t = parent.powf(2.0 * self.s) * (lambda.powf(2.0 * self.s) + self.temporal_gap(g));
        (step_x, step_t)
    }

    /// Splits a child digit into spatial indices and the time index.
    fn split_digit(&self, mut digit: u64, spatial: &mut [u64]) -> u64 {
        let tj = digit % u64::from(self.delta + 1);
        digit /= u64::from(self.delta + 1);
        for j in spatial.iter_mut().rev() {
            *j = digit % u64::from(self.delta);
            digit /= u64::from(self.delta);
        }
        tj
    }

    /// The generation-`k` cube with 1-based `index`.
    pub fn cube_at(&self, k: usize, index: u128) -> Result<CantorCube, CantorError> {
        self.check_generation(k)?;
        if index == 0 || index > self.count(k) {
            return Err(CantorError::InvalidParameter(format!("index {index} outside 1..={}", self.count(k))));
        }
        let c = u128::from(self.children());
        let mut digits = vec![0u64; k];
        let mut rest = index - 1;
        for d in digits.iter_mut().rev() {
            *d = (rest % c) as u64;
            rest /= c;
        }
        let mut xs = vec![CompensatedSum::new(); self.n];
        let mut ts = CompensatedSum::new();
        let mut spatial = vec![0u64; self.n];
        for (g, &digit) in digits.iter().enumerate() {
            let (step_x, step_t) = self.steps(g + 1);
            let tj = self.split_digit(digit, &mut spatial);
            for (acc, &j) in xs.iter_mut().zip(&spatial) {
                acc.add(j as f64 * step_x);
            }
            ts.add(tj as f64 * step_t);
        }
        let corner = PsPoint::new(xs.iter().map(CompensatedSum::value).collect(), ts.value());
        let cube = PsCube::new(corner, self.side(k), self.s).map_err(|e| CantorError::InvalidParameter(e.to_string()))?;
        Ok(CantorCube { generation: k, index, cube })
    }

    /// All generation-`k` cubes in index order.
    pub fn generation(&self, k: usize) -> Result<Vec<CantorCube>, CantorError> {
        self.check_generation(k)?;
        let count = self.count(k);
        if count > 50_000_000 {
            return Err(CantorError::InvalidParameter(format!("generation {k} has {count} cubes")));
        }
        (1..=count).map(|i| self.cube_at(k, i)).collect()
    }

    /// Generation-`k` cubes containing `p` for `k = 0, 1, ...` down to
    /// `max_k` or the deepest containing cube. Cubes are closed. Empty if `p`
    /// is outside the unit cube.
    pub fn locate_chain(&self, p: &PsPoint, max_k: usize) -> Result<Vec<CantorCube>, CantorError> {
        self.check_generation(max_k)?;
        if p.n() != self.n {
            return Err(CantorError::InvalidParameter(format!("point has {} spatial coordinates, expected {}", p.n(), self.n)));
        }
        let mut chain = Vec::new();
        let unit = self.cube_at(0, 1)?;
        if !contains_closed(&unit.cube, p, 1.0) {
            return Ok(chain);
        }
        chain.push(unit);
        let c = u128::from(self.children());
        let mut xs = vec![CompensatedSum::new(); self.n];
        let mut ts = CompensatedSum::new();
        let mut index0: u128 = 0;
        for g in 1..=max_k {
            let (step_x, step_t) = self.steps(g);
            let side = self.side(g);
            let time_side = side.powf(2.0 * self.s);
            let mut digit: u64 = 0;
            let mut inside = true;
            for (i, acc) in xs.iter_mut().enumerate() {
                let rel = p.x[i] - acc.value();
                let j = (rel / step_x).floor().clamp(0.0, f64::from(self.delta - 1));
                let lo = j * step_x;
                let tol = SLACK * side + rounding(p.x[i]);
                if !(rel >= lo - tol && rel <= lo + side + tol) {
                    inside = false;
                    break;
                }
                acc.add(lo);
                digit = digit * u64::from(self.delta) + j as u64;
            }
            if !inside {
                break;
            }
            let rel = p.t - ts.value();
            let j = (rel / step_t).floor().clamp(0.0, f64::from(self.delta));
            let lo = j * step_t;
            let tol = SLACK * time_side + rounding(p.t);
            if !(rel >= lo - tol && rel <= lo + time_side + tol) {
                break;
            }
            ts.add(lo);
            digit = digit * u64::from(self.delta + 1) + j as u64;
            index0 = index0 * c + u128::from(digit);
            let corner = PsPoint::new(xs.iter().map(CompensatedSum::value).collect(), ts.value());
            let cube = PsCube::new(corner, side, self.s).map_err(|e| CantorError::InvalidParameter(e.to_string()))?;
            chain.push(CantorCube { generation: g, index: index0 + 1, cube });
        }
        Ok(chain)
    }

    /// The generation-`k` cube containing `p`, if any.
    pub fn locate(&self, k: usize, p: &PsPoint) -> Result<Option<CantorCube>, CantorError> {
        let mut chain = self.locate_chain(p, k)?;
        Ok(if chain.len() == k + 1 { chain.pop() } else { None })
    }

    /// One atom of weight `((δ+1)δ^n)^{-k}` per generation-`k` cube.
    pub fn natural_measure(&self, k: usize, placement: AtomPlacement) -> Result<DiscreteMeasure, CantorError> {
        let cubes = self.generation(k)?;
        let total = self.count(k);
        // exact while the count is below 2^53
        let w = 1.0 / total as f64;
        let mut m = DiscreteMeasure::empty(self.n, self.s).map_err(|e| CantorError::InvalidParameter(e.to_string()))?;
        for q in &cubes {
            let p = match placement {
                AtomPlacement::Center => q.cube.center(),
                AtomPlacement::MinCorner => q.cube.corner.clone(),
            };
            m.push(&p.x, p.t, w).map_err(|e| CantorError::InvalidParameter(e.to_string()))?;
        }
        Ok(m)
    }
}

/// Relative slack on cube faces in [`CantorSpec::locate_chain`].
const SLACK: f64 = 1e-12;

/// Absolute rounding allowance for a coordinate of the unit cube.
fn rounding(v: f64) -> f64 {
    8.0 * f64::EPSILON * (1.0 + v.abs())
}

fn contains_closed(q: &PsCube, p: &PsPoint, side: f64) -> bool {
    let tol = SLACK * side;
    p.x.iter().zip(&q.corner.x).all(|(x, c)| *x >= c - tol - rounding(*x) && *x <= c + q.side + tol + rounding(*x))
        && p.t >= q.corner.t - tol - rounding(p.t)
        && p.t <= q.corner.t + q.time_side() + tol + rounding(p.t)
}
