//! s-parabolic geometry on `R^{n+1}`: distance, homogeneous norm, dilations,
//! cubes, balls and dyadic grids.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::GeoError;

/// A space-time point `(x, t)` with `x` in `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl PsPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn origin(n: usize) -> Self {
        Self { x: vec![0.0; n], t: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Componentwise difference `self - other`.
    pub fn sub(&self, other: &PsPoint) -> Result<PsPoint, GeoError> {
        check_dims(self.n(), other.n())?;
        Ok(PsPoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            t: self.t - other.t,
        })
    }

    pub fn spatial_norm(&self) -> f64 {
        euclid(&self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn euclid(x: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => x[0].abs(),
        _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

fn check_dims(expected: usize, found: usize) -> Result<(), GeoError> {
    if expected != found {
        return Err(GeoError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Rejects `s` outside `(1/2, 1]`.
pub fn validate_s(s: f64) -> Result<(), GeoError> {
    if !(s > 0.5 && s <= 1.0) {
        return Err(GeoError::InvalidParameter(format!("s = {s} must lie in (1/2, 1]")));
    }
    Ok(())
}

/// `max(|x - y|, |t - τ|^(1/(2s)))`.
pub fn ps_dist(a: &PsPoint, b: &PsPoint, s: f64) -> Result<f64, GeoError> {
    check_dims(a.n(), b.n())?;
    Ok(ps_dist_raw(&a.x, a.t, &b.x, b.t, s))
}

#[inline]
pub(crate) fn ps_dist_raw(ax: &[f64], at: f64, bx: &[f64], bt: f64, s: f64) -> f64 {
    let mut sq = 0.0;
    for (u, v) in ax.iter().zip(bx) {
        let d = u - v;
        sq += d * d;
    }
    let dt = (at - bt).abs();
    let tpart = if dt == 0.0 { 0.0 } else { dt.powf(0.5 / s) };
    sq.sqrt().max(tpart)
}

/// The `δ_λ`-homogeneous norm: the unique `ρ > 0` with
/// `|x|²/ρ² + t²/ρ^(4s) = 1`, and 0 at the origin.
///
/// `tol` is the relative tolerance on `ρ`.
pub fn ps_norm(a: &PsPoint, s: f64, tol: f64) -> Result<f64, GeoError> {
    if !(tol > 0.0) {
        return Err(GeoError::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let r = a.spatial_norm();
    let tau = a.t.abs();
    if r == 0.0 && tau == 0.0 {
        return Ok(0.0);
    }
    if tau == 0.0 {
        return Ok(r);
    }
    let tpart = tau.powf(0.5 / s);
    if r == 0.0 {
        return Ok(tpart);
    }
    let f = |rho: f64| (r / rho).powi(2) + (tpart / rho).powf(4.0 * s) - 1.0;
    let df = |rho: f64| -2.0 * (r / rho).powi(2) / rho - 4.0 * s * (tpart / rho).powf(4.0 * s) / rho;
    let mut lo = r.min(tpart);
    let mut hi = r + tpart;
    while (hi - lo) > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut rho = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fv = f(rho);
        if fv > 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        let mut next = rho - fv / df(rho);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - rho).abs();
        rho = next;
        if step <= tol * rho || hi - lo <= tol * rho {
            return Ok(rho);
        }
    }
    Err(GeoError::NoConvergence { residual: f(rho) })
}

/// `δ_λ(x, t) = (λx, λ^(2s) t)`.
pub fn dilate(a: &PsPoint, lambda: f64, s: f64) -> PsPoint {
    PsPoint { x: a.x.iter().map(|v| lambda * v).collect(), t: lambda.powf(2.0 * s) * a.t }
}

/// An s-parabolic cube `[c, c + ℓ)^n × [c_t, c_t + ℓ^(2s))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsCube {
    pub corner: PsPoint,
    pub side: f64,
    pub s: f64,
}

impl PsCube {
    pub fn new(corner: PsPoint, side: f64, s: f64) -> Result<Self, GeoError> {
        validate_s(s)?;
        if !(side > 0.0 && side.is_finite()) {
            return Err(GeoError::InvalidParameter(format!("cube side {side} must be positive")));
        }
        if !corner.is_finite() {
            return Err(GeoError::InvalidParameter("cube corner must be finite".into()));
        }
        Ok(Self { corner, side, s })
    }

    /// The unit cube `[0,1)^{n+1}`.
    pub fn unit(n: usize, s: f64) -> Result<Self, GeoError> {
        Self::new(PsPoint::origin(n), 1.0, s)
    }

    pub fn n(&self) -> usize {
        self.corner.n()
    }

    pub fn time_side(&self) -> f64 {
        self.side.powf(2.0 * self.s)
    }

    pub fn center(&self) -> PsPoint {
        let h = 0.5 * self.side;
        PsPoint {
            x: self.corner.x.iter().map(|c| c + h).collect(),
            t: self.corner.t + 0.5 * self.time_side(),
        }
    }

    /// `ℓ · max(√n, 1)`.
    pub fn diam(&self) -> f64 {
        self.side * (self.n() as f64).sqrt().max(1.0)
    }

    /// Half-open membership.
    pub fn contains(&self, p: &PsPoint) -> bool {
        p.n() == self.n() && self.contains_raw(&p.x, p.t)
    }

    #[inline]
    pub(crate) fn contains_raw(&self, x: &[f64], t: f64) -> bool {
        let ts = self.time_side();
        if !(t >= self.corner.t && t < self.corner.t + ts) {
            return false;
        }
        self.corner.x.iter().zip(x).all(|(c, v)| *v >= *c && *v < c + self.side)
    }

    /// Closed membership.
    pub fn contains_closed(&self, p: &PsPoint) -> bool {
        let ts = self.time_side();
        p.n() == self.n()
            && p.t >= self.corner.t
            && p.t <= self.corner.t + ts
            && self.corner.x.iter().zip(&p.x).all(|(c, v)| *v >= *c && *v <= c + self.side)
    }

    /// Concentric rescaling by `λ`.
    pub fn scale(&self, lambda: f64) -> Result<PsCube, GeoError> {
        if !(lambda > 0.0) {
            return Err(GeoError::InvalidParameter(format!("scale factor {lambda} must be positive")));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let side = lambda * self.side;
        let ds = 0.5 * (self.side - side);
        let dt = 0.5 * (self.time_side() - side.powf(2.0 * self.s));
        let corner = PsPoint { x: self.corner.x.iter().map(|c| c + ds).collect(), t: self.corner.t + dt };
        PsCube::new(corner, side, self.s)
    }
}

/// Concentric rescaling of `q` by `λ`.
pub fn cube_scale(q: &PsCube, lambda: f64) -> Result<PsCube, GeoError> {
    q.scale(lambda)
}

/// Closed ball `{y : ps_dist(y, center) <= radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsBall {
    pub center: PsPoint,
    pub radius: f64,
    pub s: f64,
}

impl PsBall {
    pub fn new(center: PsPoint, radius: f64, s: f64) -> Result<Self, GeoError> {
        validate_s(s)?;
        if !(radius >= 0.0) {
            return Err(GeoError::InvalidParameter(format!("radius {radius} must be non-negative")));
        }
        Ok(Self { center, radius, s })
    }

    pub fn contains(&self, p: &PsPoint) -> bool {
        p.n() == self.center.n() && ps_dist_raw(&p.x, p.t, &self.center.x, self.center.t, self.s) <= self.radius
    }
}

/// The dyadic subdivision of a root cube at a fixed level.
///
/// Spatial sides are halved per level; in time the root is cut into
/// `ceil(2^(2s·level))` slabs of height `(ℓ/2^level)^(2s)`, the last one
/// overshooting the top face when `2^(2s·level)` is not an integer.
#[derive(Clone, Debug)]
pub struct DyadicGrid {
    root: PsCube,
    level: u32,
    side: f64,
    time_side: f64,
    per_axis: u64,
    time_cells: u64,
}

/// Packed index of a dyadic cell.
pub type CellKey = u128;

impl DyadicGrid {
    pub fn new(root: &PsCube, level: u32) -> Result<Self, GeoError> {
        if level > 40 {
            return Err(GeoError::InvalidParameter(format!("dyadic level {level} too deep")));
        }
        let per_axis = 1u64 << level;
        let side = root.side / per_axis as f64;
        let time_side = side.powf(2.0 * root.s);
        let exact = 2f64.powf(2.0 * root.s * f64::from(level));
        let time_cells = (exact * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let total = (per_axis as u128).checked_pow(root.n() as u32).and_then(|v| v.checked_mul(time_cells as u128));
        if total.is_none() {
            return Err(GeoError::InvalidParameter(format!("dyadic level {level} has too many cells")));
        }
        Ok(Self { root: root.clone(), level, side, time_side, per_axis, time_cells })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn root(&self) -> &PsCube {
        &self.root
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn time_side(&self) -> f64 {
        self.time_side
    }

    pub fn cell_count(&self) -> u128 {
        (self.per_axis as u128).pow(self.root.n() as u32) * self.time_cells as u128
    }

    pub fn time_cells(&self) -> u64 {
        self.time_cells
    }

    /// Cell containing `(x, t)`, or `None` outside the grid.
    pub fn cell_of(&self, x: &[f64], t: f64) -> Option<CellKey> {
        let mut key: u128 = 0;
        for (c, v) in self.root.corner.x.iter().zip(x) {
            let u = ((v - c) / self.side).floor();
            if !(u >= 0.0 && u < self.per_axis as f64) {
                return None;
            }
            let mut i = u as u64;
            // guard the floor against rounding across a cell wall
            let lo = c + i as f64 * self.side;
            if *v < lo && i > 0 {
                i -= 1;
            } else if i + 1 < self.per_axis && *v >= c + (i + 1) as f64 * self.side {
                i += 1;
            }
            key = key * self.per_axis as u128 + i as u128;
        }
        let u = ((t - self.root.corner.t) / self.time_side).floor();
        if !(u >= 0.0 && u < self.time_cells as f64) {
            return None;
        }
        let mut j = u as u64;
        let lo = self.root.corner.t + j as f64 * self.time_side;
        if t < lo && j > 0 {
            j -= 1;
        } else if j + 1 < self.time_cells && t >= self.root.corner.t + (j + 1) as f64 * self.time_side {
            j += 1;
        }
        Some(key * self.time_cells as u128 + j as u128)
    }

    /// The cube with the given packed index.
    pub fn cube(&self, key: CellKey) -> PsCube {
        let n = self.root.n();
        let j = (key % self.time_cells as u128) as u64;
        let mut rest = key / self.time_cells as u128;
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let i = (rest % self.per_axis as u128) as u64;
            rest /= self.per_axis as u128;
            x[k] = self.root.corner.x[k] + i as f64 * self.side;
        }
        let t = self.root.corner.t + j as f64 * self.time_side;
        PsCube { corner: PsPoint { x, t }, side: self.side, s: self.root.s }
    }

    /// Spacing-preserving copy with every corner moved by `offset` cells.
    pub fn shifted(&self, offset: f64) -> DyadicGrid {
        let mut g = self.clone();
        for c in &mut g.root.corner.x {
            *c -= offset * self.side;
        }
        g.root.corner.t -= offset * self.time_side;
        g.per_axis += 1;
        g.time_cells += 1;
        g
    }
}

/// All cubes of the level-`level` dyadic subdivision of `bounding`, in
/// lexicographic (spatial indices, time index) order.
pub fn dyadic_cubes(level: u32, bounding: &PsCube) -> Result<Vec<PsCube>, GeoError> {
    let grid = DyadicGrid::new(bounding, level)?;
    let count = grid.cell_count();
    if count > 50_000_000 {
        return Err(GeoError::InvalidParameter(format!("{count} cubes requested; use DyadicGrid instead")));
    }
    Ok((0..count).map(|k| grid.cube(k)).collect())
}

/// Smallest cube anchored at the componentwise minimum of `points` that
/// contains all of them (half-open), or the unit cube around a single point.
pub fn bounding_cube(points: &[PsPoint], s: f64) -> Result<PsCube, GeoError> {
    validate_s(s)?;
    let first = points.first().ok_or(GeoError::EmptyInput)?;
    let n = first.n();
    let mut lo = first.x.clone();
    let mut hi = first.x.clone();
    let (mut tlo, mut thi) = (first.t, first.t);
    for p in points {
        check_dims(n, p.n())?;
        for k in 0..n {
            lo[k] = lo[k].min(p.x[k]);
            hi[k] = hi[k].max(p.x[k]);
        }
        tlo = tlo.min(p.t);
        thi = thi.max(p.t);
    }
    let mut extent: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    if thi > tlo {
        extent = extent.max((thi - tlo).powf(0.5 / s));
    }
    let side = if extent > 0.0 { extent * (1.0 + 1e-9) } else { 1.0 };
    PsCube::new(PsPoint { x: lo, t: tlo }, side, s)
}

/// `min` over levels `0..=max_level` of `Σ diam(Q)^d` over occupied dyadic
/// cubes of the bounding cube of `points`.
pub fn hausdorff_content_upper(points: &[PsPoint], d: f64, s: f64, max_level: u32) -> Result<f64, GeoError> {
    let root = bounding_cube(points, s)?;
    hausdorff_content_upper_in(points, d, &root, max_level)
}

/// As [`hausdorff_content_upper`] with an explicit root cube. Points outside
/// the root are ignored.
pub fn hausdorff_content_upper_in(points: &[PsPoint], d: f64, root: &PsCube, max_level: u32) -> Result<f64, GeoError> {
    if points.is_empty() {
        return Err(GeoError::EmptyInput);
    }
    if !(d >= 0.0) {
        return Err(GeoError::InvalidParameter(format!("content dimension {d} must be non-negative")));
    }
    let mut best = f64::INFINITY;
    for level in 0..=max_level {
        let grid = DyadicGrid::new(root, level)?;
        let occupied: HashSet<CellKey> = points.iter().filter_map(|p| grid.cell_of(&p.x, p.t)).collect();
        let diam = grid.side() * (root.n() as f64).sqrt().max(1.0);
        best = best.min(occupied.len() as f64 * diam.powf(d));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: &[f64], t: f64) -> PsPoint {
        PsPoint::new(x.to_vec(), t)
    }

    #[test]
    fn norm_matches_heat_closed_form() {
        for &(x, t) in &[(0.3, 0.7), (2.0, -0.1), (1e-4, 3.0), (5.0, 5.0)] {
            let rho = ps_norm(&pt(&[x], t), 1.0, 1e-13).unwrap();
            let exact = ((x * x + (x.powi(4) + 4.0 * t * t).sqrt()) / 2.0).sqrt();
            assert!((rho - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn norm_of_axes() {
        assert_eq!(ps_norm(&pt(&[0.0, 0.0], 0.0), 0.75, 1e-12).unwrap(), 0.0);
        assert!((ps_norm(&pt(&[3.0, 4.0], 0.0), 0.75, 1e-12).unwrap() - 5.0).abs() < 1e-15);
        let r = ps_norm(&pt(&[0.0], -8.0), 0.75, 1e-12).unwrap();
        assert!((r - 4.0).abs() < 1e-13);
    }

    #[test]
    fn dist_example() {
        let d = ps_dist(&pt(&[0.0], 0.0), &pt(&[1.0], 4.0), 1.0).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(ps_dist(&pt(&[0.0], 0.0), &pt(&[0.0, 1.0], 0.0), 1.0).is_err());
    }

    #[test]
    fn cube_contract_and_scale_roundtrip() {
        let q = PsCube::new(pt(&[0.0, 0.0], 0.0), 1.0, 0.75).unwrap();
        let half = q.scale(0.5).unwrap();
        assert!((half.side - 0.5).abs() < 1e-15);
        let c0 = q.center();
        let c1 = half.center();
        assert!(c0.x.iter().zip(&c1.x).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!((c0.t - c1.t).abs() < 1e-15);
        let back = half.scale(2.0).unwrap();
        assert!((back.side - 1.0).abs() < 1e-15 && (back.corner.t).abs() < 1e-15);
        assert_eq!(q.scale(1.0).unwrap(), q);
    }

    #[test]
    fn half_open_membership() {
        let q = PsCube::unit(1, 1.0).unwrap();
        assert!(q.contains(&pt(&[0.0], 0.0)));
        assert!(!q.contains(&pt(&[1.0], 0.5)));
        assert!(!q.contains(&pt(&[0.5], 1.0)));
        assert!(q.contains_closed(&pt(&[1.0], 1.0)));
    }

    #[test]
    fn dyadic_counts() {
        let q = PsCube::unit(1, 1.0).unwrap();
        assert_eq!(dyadic_cubes(2, &q).unwrap().len(), 4 * 16);
        let q = PsCube::unit(2, 0.75).unwrap();
        // 2^(1.5*3) = 22.6 -> 23 slabs
        assert_eq!(dyadic_cubes(3, &q).unwrap().len(), 64 * 23);
    }

    #[test]
    fn dyadic_cells_partition_the_root() {
        let q = PsCube::unit(1, 0.75).unwrap();
        let grid = DyadicGrid::new(&q, 3).unwrap();
        let cubes = dyadic_cubes(3, &q).unwrap();
        for i in 0..200 {
            let p = pt(&[(i as f64 * 0.618_034) % 1.0], (i as f64 * 0.414_213_5) % 1.0);
            let hits: Vec<usize> = cubes.iter().enumerate().filter(|(_, c)| c.contains(&p)).map(|(k, _)| k).collect();
            assert_eq!(hits.len(), 1);
            assert_eq!(grid.cell_of(&p.x, p.t), Some(hits[0] as u128));
        }
    }

    #[test]
    fn content_of_full_lattice_is_bounded() {
        let mut pts = Vec::new();
        for i in 0..16 {
            for j in 0..256 {
                pts.push(pt(&[i as f64 / 16.0], j as f64 / 256.0));
            }
        }
        let root = PsCube::unit(1, 1.0).unwrap();
        let c = hausdorff_content_upper_in(&pts, 2.0, &root, 4).unwrap();
        assert!(c > 0.0 && c <= 1.0);
    }

    fn arb_point(n: usize) -> impl Strategy<Value = PsPoint> {
        (prop::collection::vec(-10.0f64..10.0, n), -10.0f64..10.0).prop_map(|(x, t)| PsPoint::new(x, t))
    }

    proptest! {
        #[test]
        fn dist_is_a_metric(s in 0.51f64..=1.0, a in arb_point(2), b in arb_point(2), c in arb_point(2)) {
            let ab = ps_dist(&a, &b, s).unwrap();
            let ba = ps_dist(&b, &a, s).unwrap();
            let bc = ps_dist(&b, &c, s).unwrap();
            let ac = ps_dist(&a, &c, s).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-12) + 1e-12);
            prop_assert_eq!(ps_dist(&a, &a, s).unwrap(), 0.0);
        }

        #[test]
        fn norm_is_homogeneous(s in 0.51f64..=1.0, a in arb_point(3), lam in 0.01f64..100.0) {
            let r = ps_norm(&a, s, 1e-13).unwrap();
            let rl = ps_norm(&dilate(&a, lam, s), s, 1e-13).unwrap();
            prop_assert!((rl - lam * r).abs() <= 1e-10 * (lam * r).max(1e-300));
        }

        #[test]
        fn norm_is_comparable_to_dist(s in 0.51f64..=1.0, a in arb_point(2)) {
            let r = ps_norm(&a, s, 1e-13).unwrap();
            let d = ps_dist(&a, &PsPoint::origin(2), s).unwrap();
            prop_assume!(d > 1e-12);
            let ratio = r / d;
            prop_assert!(ratio >= 1.0 - 1e-12 && ratio <= 2f64.sqrt() + 1e-12, "ratio {}", ratio);
        }

        #[test]
        fn dist_scales_under_dilation(s in 0.51f64..=1.0, a in arb_point(1), b in arb_point(1), lam in 0.01f64..100.0) {
            let d = ps_dist(&a, &b, s).unwrap();
            let dl = ps_dist(&dilate(&a, lam, s), &dilate(&b, lam, s), s).unwrap();
            prop_assert!((dl - lam * d).abs() <= 1e-11 * (lam * d).max(1e-300));
        }
    }
}
