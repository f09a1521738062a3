//! Largest mass placeable on a point set under dyadic cube caps.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, MeasureError};
use crate::lp::{solve_lp, LpInstance};
use crate::psgeo::{bounding_cube, CellKey, DyadicGrid, PsCube, PsPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrostmanResult {
    pub value: f64,
    /// Per input point; points sharing every cell split their class weight
    /// evenly.
    pub weights: Vec<f64>,
    /// Number of LP columns after merging points that share every cell.
    pub classes: usize,
    /// Number of distinct cap rows.
    pub constraints: usize,
    pub iterations: usize,
    pub duality_gap: f64,
}

const LP_TOL: f64 = 1e-10;

/// `max Σ w` over `w ≥ 0` with `Σ_{p ∈ Q} w_p ≤ diam(Q)^d` for every dyadic
/// cube `Q` of the bounding cube at levels `0..=level`.
pub fn frostman_lower_bound(points: &[PsPoint], d: f64, s: f64, level: u32) -> Result<FrostmanResult, MeasureError> {
    let root = bounding_cube(points, s)?;
    frostman_lower_bound_in(points, d, &root, level)
}

/// As [`frostman_lower_bound`] over the dyadic cubes of `root`.
pub fn frostman_lower_bound_in(points: &[PsPoint], d: f64, root: &PsCube, level: u32) -> Result<FrostmanResult, MeasureError> {
    if points.is_empty() {
        return Err(MeasureError::Geo(GeoError::EmptyInput));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!("content dimension must be positive, got {d}")));
    }
    let grids: Vec<DyadicGrid> = (0..=level).map(|l| DyadicGrid::new(root, l)).collect::<Result<_, _>>()?;
    let mut class_of_sig: HashMap<Vec<CellKey>, usize> = HashMap::new();
    let mut signatures: Vec<Vec<CellKey>> = Vec::new();
    let mut class_of_point = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if p.n() != root.n() {
            return Err(GeoError::DimensionMismatch { expected: root.n(), found: p.n() }.into());
        }
        let sig: Vec<CellKey> = grids
            .iter()
            .map(|g| g.cell_of(&p.x, p.t).ok_or_else(|| MeasureError::InvalidParameter(format!("point {i} lies outside the root cube"))))
            .collect::<Result<_, _>>()?;
        let next = signatures.len();
        let class = *class_of_sig.entry(sig.clone()).or_insert_with(|| {
            signatures.push(sig);
            next
        });
        class_of_point.push(class);
    }
    let classes = signatures.len();
    // one row per distinct member set, keeping the tightest cap
    let mut rows: HashMap<Vec<usize>, f64> = HashMap::new();
    for (l, grid) in grids.iter().enumerate() {
        let cap = (grid.side() * (root.n() as f64).sqrt().max(1.0)).powf(d);
        let mut members: HashMap<CellKey, Vec<usize>> = HashMap::new();
        for (c, sig) in signatures.iter().enumerate() {
            members.entry(sig[l]).or_default().push(c);
        }
        for (_, set) in members {
            let e = rows.entry(set).or_insert(f64::INFINITY);
            *e = e.min(cap);
        }
    }
    let mut rows: Vec<(Vec<usize>, f64)> = rows.into_iter().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut lp = LpInstance::with_unit_objective(classes)?;
    let mut coeffs = vec![0.0; classes];
    for (set, cap) in &rows {
        coeffs.iter_mut().for_each(|c| *c = 0.0);
        for &c in set {
            coeffs[c] = 1.0;
        }
        lp.add_row(&coeffs, *cap)?;
    }
    let sol = solve_lp(&lp, LP_TOL)?;
    let mut sizes = vec![0usize; classes];
    for &c in &class_of_point {
        sizes[c] += 1;
    }
    let weights = class_of_point.iter().map(|&c| sol.weights[c] / sizes[c] as f64).collect();
    Ok(FrostmanResult {
        value: sol.value,
        weights,
        classes,
        constraints: rows.len(),
        iterations: sol.iterations,
        duality_gap: sol.duality_gap,
    })
}
