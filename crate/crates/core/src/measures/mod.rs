//! Finite signed atomic measures on `ℝ^{n+1}`, growth audits, Frostman-type
//! lower bounds and the JSON-lines file format.

pub mod audit;
pub mod frostman;
pub mod io;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, MeasureError};
use crate::psgeo::{validate_s, PsPoint};
use crate::quad::compensated_sum;

pub use audit::{growth_audit, AuditFamily, CubeNormalization, GrowthReport};
pub use frostman::{frostman_lower_bound, frostman_lower_bound_in, FrostmanResult};
pub use io::{load, read_measure, save, write_measure};

/// Atoms with real weights. Coordinates are stored flat, `n + 1` per atom
/// with time last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    n: usize,
    s: f64,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn empty(n: usize, s: f64) -> Result<Self, MeasureError> {
        if n == 0 {
            return Err(MeasureError::InvalidParameter("n must be at least 1".into()));
        }
        validate_s(s)?;
        Ok(Self { n, s, coords: Vec::new(), weights: Vec::new() })
    }

    pub fn from_atoms(atoms: &[PsPoint], weights: Vec<f64>, n: usize, s: f64) -> Result<Self, MeasureError> {
        if atoms.len() != weights.len() {
            return Err(MeasureError::InvalidParameter(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        let mut m = Self::empty(n, s)?;
        m.coords.reserve(atoms.len() * (n + 1));
        for (a, w) in atoms.iter().zip(weights) {
            m.push(&a.x, a.t, w)?;
        }
        Ok(m)
    }

    /// Uniform weights `mass / N` on the given atoms.
    pub fn uniform(atoms: &[PsPoint], mass: f64, n: usize, s: f64) -> Result<Self, MeasureError> {
        let w = if atoms.is_empty() { 0.0 } else { mass / atoms.len() as f64 };
        Self::from_atoms(atoms, vec![w; atoms.len()], n, s)
    }

    pub fn push(&mut self, x: &[f64], t: f64, w: f64) -> Result<(), MeasureError> {
        if x.len() != self.n {
            return Err(GeoError::DimensionMismatch { expected: self.n, found: x.len() }.into());
        }
        if !(w.is_finite() && t.is_finite() && x.iter().all(|v| v.is_finite())) {
            return Err(MeasureError::InvalidParameter("atom coordinates and weights must be finite".into()));
        }
        self.coords.extend_from_slice(x);
        self.coords.push(t);
        self.weights.push(w);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        let k = i * (self.n + 1);
        &self.coords[k..k + self.n]
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.coords[i * (self.n + 1) + self.n]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom(&self, i: usize) -> PsPoint {
        PsPoint::new(self.x(i).to_vec(), self.t(i))
    }

    pub fn atoms(&self) -> Vec<PsPoint> {
        (0..self.len()).map(|i| self.atom(i)).collect()
    }

    /// Same atoms with new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if weights.len() != self.len() {
            return Err(MeasureError::InvalidParameter(format!("{} atoms but {} weights", self.len(), weights.len())));
        }
        Ok(Self { weights, ..self.clone() })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { weights: self.weights.iter().map(|w| c * w).collect(), ..self.clone() }
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn total_variation(&self) -> f64 {
        compensated_sum(self.weights.iter().map(|w| w.abs()))
    }

    /// `max(w, 0)` atomwise; atoms are kept so that the two parts align.
    pub fn positive_part(&self) -> Self {
        Self { weights: self.weights.iter().map(|w| w.max(0.0)).collect(), ..self.clone() }
    }

    /// `max(-w, 0)` atomwise.
    pub fn negative_part(&self) -> Self {
        Self { weights: self.weights.iter().map(|w| (-w).max(0.0)).collect(), ..self.clone() }
    }

    /// `|m|`.
    pub fn variation(&self) -> Self {
        Self { weights: self.weights.iter().map(|w| w.abs()).collect(), ..self.clone() }
    }

    /// Image under `p -> -p`.
    pub fn reflected(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -c).collect(), ..self.clone() }
    }

    /// Image under the dilation `(x, t) -> (λx, λ^{2s}t)` with weights kept.
    pub fn dilated(&self, lambda: f64) -> Self {
        let lt = lambda.powf(2.0 * self.s);
        let stride = self.n + 1;
        let coords = self.coords.iter().enumerate().map(|(k, c)| if k % stride == self.n { lt * c } else { lambda * c }).collect();
        Self { coords, ..self.clone() }
    }
}
