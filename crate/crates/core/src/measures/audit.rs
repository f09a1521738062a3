//! Growth audits `sup |m|(B) / r(B)^d` over finite ball and cube families.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, MeasureError};
use crate::measures::DiscreteMeasure;
use crate::psgeo::{bounding_cube, ps_dist_raw, DyadicGrid, PsBall, PsCube, PsPoint};

/// Which length a cube's mass is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CubeNormalization {
    /// `ℓ(Q)`.
    Side,
    /// `diam_{p_s}(Q)`.
    Diam,
}

impl CubeNormalization {
    fn length(self, q: &PsCube) -> f64 {
        match self {
            CubeNormalization::Side => q.side,
            CubeNormalization::Diam => q.diam(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BallFamily {
    None,
    /// Pairwise below this many atoms, ladder above.
    Auto { pairwise_limit: usize },
    /// Radii: every inter-atom distance and its half, floored at `r_floor`.
    Pairwise,
    /// Radii `r_floor · ratio^j`; one center per cell of diameter
    /// `cluster · r`.
    Ladder { ratio: f64, cluster: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditFamily {
    /// Smallest audited radius or cube side; defaults to the minimum
    /// inter-atom ps-distance.
    pub r_floor: Option<f64>,
    pub balls: BallFamily,
    /// Dyadic cubes of `root` at levels `0..=dyadic_levels` with side at
    /// least `r_floor`.
    pub dyadic_levels: Option<u32>,
    /// Defaults to the bounding cube of the atoms.
    pub root: Option<PsCube>,
    /// Also audit the grids shifted by half a cell on every axis.
    pub shifted_grids: bool,
    pub cubes: Vec<PsCube>,
    pub normalization: CubeNormalization,
}

impl Default for AuditFamily {
    fn default() -> Self {
        Self {
            r_floor: None,
            balls: BallFamily::Auto { pairwise_limit: 3000 },
            dyadic_levels: None,
            root: None,
            shifted_grids: false,
            cubes: Vec::new(),
            normalization: CubeNormalization::Side,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    Ball(PsBall),
    Cube(PsCube),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub d: f64,
    /// Sup over the audited family.
    pub constant: f64,
    pub witness: Option<Witness>,
    pub family_size: usize,
    pub ball_constant: f64,
    pub cube_constant: f64,
    /// Bound on the sup over all atom-centred balls with radius at least
    /// `r_floor`; equals `ball_constant` for the pairwise family.
    pub ball_upper_bound: f64,
    pub r_floor: f64,
}

/// Audits `|m|` over `family`.
pub fn growth_audit(m: &DiscreteMeasure, d: f64, family: &AuditFamily) -> Result<GrowthReport, MeasureError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!("growth exponent must be positive, got {d}")));
    }
    if m.is_empty() {
        return Err(MeasureError::Geo(GeoError::EmptyInput));
    }
    let r_floor = match family.r_floor {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(MeasureError::InvalidParameter(format!("r_floor must be positive, got {r}"))),
        None => min_separation(m).ok_or_else(|| MeasureError::InvalidParameter("r_floor is required for a single-point support".into()))?,
    };
    let v = m.variation();
    let mut report = GrowthReport {
        d,
        constant: 0.0,
        witness: None,
        family_size: 0,
        ball_constant: 0.0,
        cube_constant: 0.0,
        ball_upper_bound: 0.0,
        r_floor,
    };
    let balls = match family.balls {
        BallFamily::Auto { pairwise_limit } if m.len() <= pairwise_limit => BallFamily::Pairwise,
        BallFamily::Auto { .. } => BallFamily::Ladder { ratio: 2f64.sqrt(), cluster: 0.25 },
        other => other,
    };
    match balls {
        BallFamily::None => {}
        BallFamily::Pairwise => {
            let (best, size) = pairwise_balls(&v, d, r_floor);
            report.family_size += size;
            report.ball_constant = best.0;
            report.ball_upper_bound = best.0;
            report.witness = best.1.map(Witness::Ball);
        }
        BallFamily::Ladder { ratio, cluster } => {
            if !(ratio > 1.0 && cluster > 0.0 && cluster < 1.0) {
                return Err(MeasureError::InvalidParameter("ladder needs ratio > 1 and 0 < cluster < 1".into()));
            }
            let out = ladder_balls(&v, d, r_floor, ratio, cluster);
            report.family_size += out.size;
            report.ball_constant = out.best;
            report.ball_upper_bound = out.upper;
            report.witness = out.witness.map(Witness::Ball);
        }
        BallFamily::Auto { .. } => unreachable!(),
    }
    let mut cubes_best = (0.0f64, None);
    if let Some(levels) = family.dyadic_levels {
        let root = match &family.root {
            Some(r) => r.clone(),
            None => bounding_cube(&m.atoms(), m.s())?,
        };
        for level in 0..=levels {
            let grid = DyadicGrid::new(&root, level)?;
            if grid.side() < r_floor * (1.0 - 1e-12) {
                break;
            }
            let mut grids = vec![grid.clone()];
            if family.shifted_grids && level > 0 {
                grids.push(grid.shifted(0.5));
            }
            for g in &grids {
                let (best, size) = grid_masses(&v, d, g, family.normalization);
                report.family_size += size;
                if best.0 > cubes_best.0 {
                    cubes_best = best;
                }
            }
        }
    }
    if !family.cubes.is_empty() {
        let (best, size) = explicit_cubes(&v, d, &family.cubes, family.normalization);
        report.family_size += size;
        if best.0 > cubes_best.0 {
            cubes_best = best;
        }
    }
    report.cube_constant = cubes_best.0;
    if report.family_size == 0 {
        return Err(MeasureError::InvalidParameter("empty audit family".into()));
    }
    report.constant = report.ball_constant.max(report.cube_constant);
    if report.cube_constant > report.ball_constant {
        report.witness = cubes_best.1.map(Witness::Cube);
    }
    Ok(report)
}

/// Audits `|m|` over an explicit cube list only.
pub fn audit_cubes(m: &DiscreteMeasure, d: f64, cubes: &[PsCube], normalization: CubeNormalization) -> Result<GrowthReport, MeasureError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!("growth exponent must be positive, got {d}")));
    }
    if cubes.is_empty() {
        return Err(MeasureError::InvalidParameter("empty audit family".into()));
    }
    let ((best, witness), size) = explicit_cubes(&m.variation(), d, cubes, normalization);
    Ok(GrowthReport {
        d,
        constant: best,
        witness: witness.map(Witness::Cube),
        family_size: size,
        ball_constant: 0.0,
        cube_constant: best,
        ball_upper_bound: 0.0,
        r_floor: cubes.iter().map(|q| q.side).fold(f64::INFINITY, f64::min),
    })
}

/// Smallest positive ps-distance between atoms, `None` for one location.
pub fn min_separation(m: &DiscreteMeasure) -> Option<f64> {
    if m.len() < 2 {
        return None;
    }
    let tree = KdTree::build(m);
    let best = (0..m.len())
        .into_par_iter()
        .map(|i| tree.nearest_other(m, i))
        .reduce(|| f64::INFINITY, f64::min);
    best.is_finite().then_some(best)
}

fn pairwise_balls(v: &DiscreteMeasure, d: f64, r_floor: f64) -> ((f64, Option<PsBall>), usize) {
    let n = v.len();
    let s = v.s();
    let per_center: Vec<(f64, f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dist: Vec<(f64, f64)> = (0..n).map(|j| (ps_dist_raw(v.x(i), v.t(i), v.x(j), v.t(j), s), v.weight(j))).collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut prefix = Vec::with_capacity(n);
            let mut acc = 0.0;
            for (_, w) in &dist {
                acc += w;
                prefix.push(acc);
            }
            let mass_within = |r: f64| {
                let k = dist.partition_point(|p| p.0 <= r);
                if k == 0 {
                    0.0
                } else {
                    prefix[k - 1]
                }
            };
            let mut best = (mass_within(r_floor) / r_floor.powf(d), r_floor);
            let mut size = 1;
            for (k, &(r, _)) in dist.iter().enumerate() {
                if k > 0 && r == dist[k - 1].0 {
                    continue;
                }
                for radius in [r, 0.5 * r] {
                    if radius >= r_floor {
                        size += 1;
                        let ratio = mass_within(radius) / radius.powf(d);
                        if ratio > best.0 {
                            best = (ratio, radius);
                        }
                    }
                }
            }
            (best.0, best.1, size)
        })
        .collect();
    let size = per_center.iter().map(|p| p.2).sum();
    let (i, &(value, radius, _)) = per_center.iter().enumerate().fold((0, &per_center[0]), |acc, (i, p)| if p.0 > acc.1 .0 { (i, p) } else { acc });
    let ball = PsBall::new(v.atom(i), radius, s).ok();
    ((value, ball), size)
}

struct LadderOutcome {
    best: f64,
    upper: f64,
    witness: Option<PsBall>,
    size: usize,
}

fn ladder_balls(v: &DiscreteMeasure, d: f64, r_floor: f64, ratio: f64, cluster: f64) -> LadderOutcome {
    let s = v.s();
    let n = v.n();
    let tree = KdTree::build(v);
    let extent = tree.extent(s);
    let mut out = LadderOutcome { best: 0.0, upper: 0.0, witness: None, size: 0 };
    let mut r = r_floor;
    loop {
        // representatives: first atom in each cell of ps-diameter cluster·r
        let cell_x = cluster * r / (n as f64).sqrt();
        let cell_t = (cluster * r).powf(2.0 * s);
        let mut reps: HashMap<Vec<i64>, usize> = HashMap::new();
        for i in 0..v.len() {
            let mut key: Vec<i64> = v.x(i).iter().map(|x| (x / cell_x).floor() as i64).collect();
            key.push((v.t(i) / cell_t).floor() as i64);
            reps.entry(key).or_insert(i);
        }
        let mut reps: Vec<usize> = reps.into_values().collect();
        reps.sort_unstable();
        let outer = ratio * r + cluster * r;
        let results: Vec<(f64, f64)> = reps.par_iter().map(|&i| tree.ball_masses(v.x(i), v.t(i), r, outer, s)).collect();
        out.size += reps.len();
        for (&i, &(inner, outer_mass)) in reps.iter().zip(&results) {
            let value = inner / r.powf(d);
            if value > out.best {
                out.best = value;
                out.witness = PsBall::new(v.atom(i), r, s).ok();
            }
            out.upper = out.upper.max(outer_mass / r.powf(d));
        }
        if r >= extent {
            break;
        }
        r *= ratio;
    }
    out
}

fn grid_masses(v: &DiscreteMeasure, d: f64, grid: &DyadicGrid, norm: CubeNormalization) -> ((f64, Option<PsCube>), usize) {
    let mut cells: HashMap<u128, f64> = HashMap::new();
    for i in 0..v.len() {
        if let Some(key) = grid.cell_of(v.x(i), v.t(i)) {
            *cells.entry(key).or_insert(0.0) += v.weight(i);
        }
    }
    let len = norm.length(&grid.cube(0));
    let mut keys: Vec<(&u128, &f64)> = cells.iter().collect();
    keys.sort_by_key(|k| *k.0);
    let mut best = (0.0, None);
    for (key, mass) in keys {
        let value = mass / len.powf(d);
        if value > best.0 {
            best = (value, Some(grid.cube(*key)));
        }
    }
    (best, cells.len())
}

fn explicit_cubes(v: &DiscreteMeasure, d: f64, cubes: &[PsCube], norm: CubeNormalization) -> ((f64, Option<PsCube>), usize) {
    let tree = KdTree::build(v);
    let values: Vec<f64> = cubes.par_iter().map(|q| tree.box_mass(q) / norm.length(q).powf(d)).collect();
    let mut best = (0.0, None);
    for (q, &value) in cubes.iter().zip(&values) {
        if value > best.0 {
            best = (value, Some(q.clone()));
        }
    }
    (best, cubes.len())
}

/// Static k-d tree over the atoms of a measure, with subtree weight sums.
struct KdTree {
    dim: usize,
    /// Atom indices in tree order.
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node: `dim` lower then `dim` upper bounding-box coordinates.
    bounds: Vec<f64>,
    /// Coordinates in tree order, `dim` per atom.
    coords: Vec<f64>,
    weights: Vec<f64>,
}

struct Node {
    start: usize,
    end: usize,
    sum: f64,
    children: Option<(usize, usize)>,
}

const LEAF: usize = 8;

impl KdTree {
    fn build(m: &DiscreteMeasure) -> Self {
        let dim = m.n() + 1;
        let mut order: Vec<usize> = (0..m.len()).collect();
        let point = |i: usize, k: usize| if k < m.n() { m.x(i)[k] } else { m.t(i) };
        let mut nodes = Vec::new();
        let mut bounds = Vec::new();
        Self::build_node(&mut order, 0, m.len(), dim, &point, &|i| m.weight(i), &mut nodes, &mut bounds);
        let mut coords = Vec::with_capacity(m.len() * dim);
        let mut weights = Vec::with_capacity(m.len());
        for &i in &order {
            for k in 0..dim {
                coords.push(point(i, k));
            }
            weights.push(m.weight(i));
        }
        Self { dim, order, nodes, bounds, coords, weights }
    }

    fn build_node(order: &mut [usize], start: usize, end: usize, dim: usize, point: &dyn Fn(usize, usize) -> f64, weight: &dyn Fn(usize) -> f64, nodes: &mut Vec<Node>, bounds: &mut Vec<f64>) -> usize {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut sum = 0.0;
        for &i in &order[start..end] {
            for k in 0..dim {
                lo[k] = lo[k].min(point(i, k));
                hi[k] = hi[k].max(point(i, k));
            }
            sum += weight(i);
        }
        let id = nodes.len();
        nodes.push(Node { start, end, sum, children: None });
        bounds.extend_from_slice(&lo);
        bounds.extend_from_slice(&hi);
        if end - start > LEAF {
            let axis = (0..dim).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
            let mid = (start + end) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| point(a, axis).total_cmp(&point(b, axis)).then(a.cmp(&b)));
            let left = Self::build_node(order, start, mid, dim, point, weight, nodes, bounds);
            let right = Self::build_node(order, mid, end, dim, point, weight, nodes, bounds);
            nodes[id].children = Some((left, right));
        }
        id
    }

    #[inline]
    fn bbox(&self, id: usize) -> (&[f64], &[f64]) {
        let b = &self.bounds[2 * self.dim * id..2 * self.dim * (id + 1)];
        b.split_at(self.dim)
    }

    /// Ps-diameter bound of the support.
    fn extent(&self, s: f64) -> f64 {
        let (lo, hi) = self.bbox(0);
        let n = self.dim - 1;
        let spatial: f64 = (0..n).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt();
        spatial.max((hi[n] - lo[n]).powf(0.5 / s))
    }

    /// `Σ w` over atoms `y` with `|y_x - x| <= r` and `|y_t - t| <= r^{2s}`
    /// for `r = inner` and `r = outer`, in one pass.
    fn ball_masses(&self, x: &[f64], t: f64, inner: f64, outer: f64, s: f64) -> (f64, f64) {
        let n = self.dim - 1;
        let radii = [inner, outer];
        let rt = radii.map(|r| r.powf(2.0 * s));
        let r2 = radii.map(|r| r * r);
        let mut totals = [0.0, 0.0];
        // (node, radii from..to still undecided)
        let mut stack = vec![(0usize, 0usize, 2usize)];
        while let Some((id, from, to)) = stack.pop() {
            let node = &self.nodes[id];
            let (lo_b, hi_b) = self.bbox(id);
            let mut near = 0.0;
            let mut far = 0.0;
            for k in 0..n {
                let (a, b) = (lo_b[k] - x[k], hi_b[k] - x[k]);
                let gap = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
                near += gap * gap;
                far += a.abs().max(b.abs()).powi(2);
            }
            let (tlo, thi) = (lo_b[n] - t, hi_b[n] - t);
            let tnear = if tlo > 0.0 { tlo } else if thi < 0.0 { -thi } else { 0.0 };
            let tfar = tlo.abs().max(thi.abs());
            let mut open = to;
            for j in (from..to).rev() {
                if near > r2[j] || tnear > rt[j] {
                    break;
                }
                open = j;
            }
            // radii from..open miss the node entirely
            let mut undecided = open;
            for j in open..to {
                if far <= r2[j] && tfar <= rt[j] {
                    for total in &mut totals[j..to] {
                        *total += node.sum;
                    }
                    break;
                }
                undecided = j + 1;
            }
            let pending = open..undecided;
            if pending.is_empty() {
                continue;
            }
            match node.children {
                Some((l, rr)) => {
                    stack.push((rr, open, undecided));
                    stack.push((l, open, undecided));
                }
                None => {
                    for p in node.start..node.end {
                        let c = &self.coords[p * self.dim..(p + 1) * self.dim];
                        let dx: f64 = (0..n).map(|k| (c[k] - x[k]).powi(2)).sum();
                        let dt = (c[n] - t).abs();
                        for j in pending.clone() {
                            if dx <= r2[j] && dt <= rt[j] {
                                totals[j] += self.weights[p];
                            }
                        }
                    }
                }
            }
        }
        (totals[0], totals[1])
    }

    /// `Σ w` over atoms in the half-open cube `q`.
    fn box_mass(&self, q: &PsCube) -> f64 {
        let n = self.dim - 1;
        let mut lo = q.corner.x.clone();
        lo.push(q.corner.t);
        let mut hi: Vec<f64> = q.corner.x.iter().map(|c| c + q.side).collect();
        hi.push(q.corner.t + q.time_side());
        let mut total = 0.0;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (lo_b, hi_b) = self.bbox(id);
            if (0..=n).any(|k| hi_b[k] < lo[k] || lo_b[k] >= hi[k]) {
                continue;
            }
            if (0..=n).all(|k| lo_b[k] >= lo[k] && hi_b[k] < hi[k]) {
                total += node.sum;
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for p in node.start..node.end {
                        let c = &self.coords[p * self.dim..(p + 1) * self.dim];
                        if (0..=n).all(|k| c[k] >= lo[k] && c[k] < hi[k]) {
                            total += self.weights[p];
                        }
                    }
                }
            }
        }
        total
    }

    /// Ps-distance from atom `i` to the nearest atom at a different location.
    fn nearest_other(&self, m: &DiscreteMeasure, i: usize) -> f64 {
        let s = m.s();
        let n = self.dim - 1;
        let (x, t) = (m.x(i), m.t(i));
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let (lo_b, hi_b) = self.bbox(id);
            let mut near = 0.0f64;
            for k in 0..n {
                let gap = (lo_b[k] - x[k]).max(x[k] - hi_b[k]).max(0.0);
                near += gap * gap;
            }
            let tgap = (lo_b[n] - t).max(t - hi_b[n]).max(0.0);
            if near.sqrt().max(tgap.powf(0.5 / s)) >= best {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for p in node.start..node.end {
                        let c = &self.coords[p * self.dim..(p + 1) * self.dim];
                        let dist = ps_dist_raw(&c[..n], c[n], x, t, s);
                        if dist > 0.0 && dist < best {
                            best = dist;
                        }
                    }
                }
            }
        }
        let _ = &self.order;
        best
    }
}

/// Centres of the grid with `per_axis` cells per spatial axis and
/// `round(per_axis^{2s})` cells in time on the unit cube, total mass 1.
pub fn uniform_grid_measure(n: usize, s: f64, per_axis: usize) -> Result<DiscreteMeasure, MeasureError> {
    let slabs = (per_axis as f64).powf(2.0 * s).round().max(1.0) as usize;
    let total = per_axis.pow(n as u32) * slabs;
    let h = 1.0 / per_axis as f64;
    let ht = 1.0 / slabs as f64;
    let mut atoms = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            x.push((rest % per_axis) as f64 * h + 0.5 * h);
            rest /= per_axis;
        }
        atoms.push(PsPoint::new(x, rest as f64 * ht + 0.5 * ht));
    }
    DiscreteMeasure::uniform(&atoms, 1.0, n, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{AtomPlacement, CantorSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(seed: u64, count: usize, n: usize, s: f64) -> DiscreteMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms: Vec<PsPoint> = (0..count).map(|_| PsPoint::new((0..n).map(|_| rng.gen::<f64>()).collect(), rng.gen())).collect();
        let weights = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DiscreteMeasure::from_atoms(&atoms, weights, n, s).unwrap()
    }

    #[test]
    fn single_atom_sits_at_the_floor() {
        let m = DiscreteMeasure::from_atoms(&[PsPoint::new(vec![0.3], 0.2)], vec![1.0], 1, 0.75).unwrap();
        let fam = AuditFamily { r_floor: Some(0.1), ..AuditFamily::default() };
        let rep = growth_audit(&m, 2.0, &fam).unwrap();
        assert!((rep.constant - 100.0).abs() < 1e-9);
        assert!(growth_audit(&m, 2.0, &AuditFamily::default()).is_err());
        assert!(growth_audit(&m, 0.0, &fam).is_err());
    }

    #[test]
    fn tree_ball_mass_matches_brute_force() {
        for &(n, s) in &[(1usize, 0.75), (2, 1.0), (3, 0.6)] {
            let m = random_measure(3, 700, n, s).variation();
            let tree = KdTree::build(&m);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..50 {
                let c: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let t = rng.gen::<f64>();
                let r = rng.gen_range(0.01..0.7);
                let brute: f64 = (0..m.len()).filter(|&i| ps_dist_raw(m.x(i), m.t(i), &c, t, s) <= r).map(|i| m.weight(i)).sum();
                assert!((tree.ball_masses(&c, t, r, r, s).0 - brute).abs() < 1e-12);
                let brute_outer: f64 = (0..m.len()).filter(|&i| ps_dist_raw(m.x(i), m.t(i), &c, t, s) <= 1.7 * r).map(|i| m.weight(i)).sum();
                let (inner, outer) = tree.ball_masses(&c, t, r, 1.7 * r, s);
                assert!((inner - brute).abs() < 1e-12 && (outer - brute_outer).abs() < 1e-12);
                let q = PsCube::new(PsPoint::new(c.clone(), t), r, s).unwrap();
                let brute_box: f64 = (0..m.len()).filter(|&i| q.contains(&m.atom(i))).map(|i| m.weight(i)).sum();
                assert!((tree.box_mass(&q) - brute_box).abs() < 1e-12);
            }
            let brute_min = (0..m.len()).flat_map(|i| (0..m.len()).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| ps_dist_raw(m.x(i), m.t(i), m.x(j), m.t(j), s)).fold(f64::INFINITY, f64::min);
            assert_eq!(min_separation(&m).unwrap(), brute_min);
        }
    }

    #[test]
    fn ladder_brackets_the_pairwise_sup() {
        let m = random_measure(9, 400, 2, 0.8).variation();
        let r_floor = 0.02;
        let exact = growth_audit(&m, 3.0, &AuditFamily { r_floor: Some(r_floor), balls: BallFamily::Pairwise, ..AuditFamily::default() }).unwrap();
        let ladder = growth_audit(&m, 3.0, &AuditFamily { r_floor: Some(r_floor), balls: BallFamily::Ladder { ratio: 1.25, cluster: 0.1 }, ..AuditFamily::default() }).unwrap();
        assert!(ladder.ball_constant <= exact.ball_constant * (1.0 + 1e-12));
        assert!(ladder.ball_upper_bound >= exact.ball_constant);
    }

    #[test]
    fn uniform_grid_tracks_ball_volume() {
        // Lebesgue volume of the unit ps-ball: |B^n_1| · 2
        for &(n, s, k, volume) in &[(1usize, 0.75, 16usize, 4.0), (2, 1.0, 10, 2.0 * std::f64::consts::PI)] {
            let m = uniform_grid_measure(n, s, k).unwrap();
            let fam = AuditFamily { r_floor: Some(1.0 / k as f64), ..AuditFamily::default() };
            let rep = growth_audit(&m, n as f64 + 2.0 * s, &fam).unwrap();
            let ratio = rep.constant / volume;
            assert!(ratio > 0.25 && ratio < 4.0, "n={n}: {}", rep.constant);
            assert!(rep.ball_upper_bound >= rep.ball_constant);
        }
    }

    #[test]
    fn enlarging_the_family_never_decreases_the_constant() {
        let m = random_measure(21, 300, 1, 0.9);
        let base = AuditFamily { r_floor: Some(0.05), balls: BallFamily::None, dyadic_levels: Some(2), root: Some(PsCube::unit(1, 0.9).unwrap()), ..AuditFamily::default() };
        let a = growth_audit(&m, 2.0, &base).unwrap();
        let b = growth_audit(&m, 2.0, &AuditFamily { dyadic_levels: Some(4), ..base.clone() }).unwrap();
        let c = growth_audit(&m, 2.0, &AuditFamily { dyadic_levels: Some(4), shifted_grids: true, balls: BallFamily::Pairwise, ..base }).unwrap();
        assert!(a.constant <= b.constant && b.constant <= c.constant);
        assert!(a.family_size < b.family_size && b.family_size < c.family_size);
    }

    #[test]
    fn cantor_generation_cubes_have_unit_ratio() {
        let spec = CantorSpec::critical(1, 0.75, 3).unwrap();
        let m = spec.natural_measure(3, AtomPlacement::Center).unwrap();
        let cubes: Vec<PsCube> = (0..=3).flat_map(|k| spec.generation(k).unwrap()).map(|c| c.cube).collect();
        let rep = audit_cubes(&m, 2.0, &cubes, CubeNormalization::Side).unwrap();
        assert!((rep.constant - 1.0).abs() < 1e-9);
    }
}
