//! Point-cloud data model, Hausdorff-type distances between finite samples
//! and plane patches, and generators for the standard example sets (line,
//! circle, cone graph, truncated lacunary-cosine graph, logarithmic-integral
//! graph, sine graph, tabulated C¹ graphs).
//!
//! Distances are exact over the finite sets involved. The naive O(|A|·|B|)
//! scan is the reference semantic; a uniform-grid index accelerates nearest
//! queries in low ambient dimension without changing any value.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grassmann::AffinePlane;

/// Duplicate-point threshold: points closer than this collapse on construction.
pub const DEDUP_TOL: f64 = 1e-14;

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Read-only access to a finite point set in ℝⁿ.
pub trait PointSet {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn pt(&self, i: usize) -> &[f64];
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A plain owned point set (flat storage, row-major).
#[derive(Debug, Clone, Default)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize) -> Points {
        Points { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Points {
        Points { dim, data: Vec::with_capacity(dim * n) }
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Points {
        let mut p = Points::with_capacity(dim, rows.len());
        for r in rows {
            p.push(r);
        }
        p
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn to_vectors(&self) -> Vec<DVector<f64>> {
        self.iter().map(DVector::from_column_slice).collect()
    }
}

impl PointSet for Points {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        if self.dim == 0 { 0 } else { self.data.len() / self.dim }
    }
    fn pt(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// A finite sample of a set Σ ⊂ ℝⁿ with a declared covering resolution.
///
/// `resolution` is the guaranteed covering radius: every point of the
/// underlying set lies within `resolution` of some sample. Clouds are
/// immutable after construction; duplicate points (within `1e-14`) are
/// removed on construction.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Points,
    resolution: f64,
    label: String,
    /// Scales below this are geometrically meaningless (e.g. below the
    /// truncation scale of a series generator). `None` means no extra floor.
    min_reliable_scale: Option<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>, resolution: f64, label: &str) -> Result<PointCloud> {
        if resolution <= 0.0 {
            return Err(Error::InvalidParameter("resolution h must be > 0".into()));
        }
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
        }
        let points = dedup(dim, rows);
        Ok(PointCloud {
            points,
            resolution,
            label: label.to_string(),
            min_reliable_scale: None,
        })
    }

    pub fn with_min_reliable_scale(mut self, scale: f64) -> PointCloud {
        self.min_reliable_scale = Some(scale);
        self
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn min_reliable_scale(&self) -> Option<f64> {
        self.min_reliable_scale
    }

    /// Union of two clouds; the resolution is the coarser of the two.
    pub fn merge(a: &PointCloud, b: &PointCloud, label: &str) -> Result<PointCloud> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
        }
        let rows: Vec<Vec<f64>> = a.points.iter().chain(b.points.iter()).map(|p| p.to_vec()).collect();
        let mut c = PointCloud::new(a.dim(), rows, a.resolution.max(b.resolution), label)?;
        c.min_reliable_scale = match (a.min_reliable_scale, b.min_reliable_scale) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, y) => x.or(y),
        };
        Ok(c)
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.pt(i))
    }
}

impl PointSet for PointCloud {
    fn dim(&self) -> usize {
        self.points.dim()
    }
    fn len(&self) -> usize {
        self.points.len()
    }
    fn pt(&self, i: usize) -> &[f64] {
        self.points.pt(i)
    }
}

fn dedup(dim: usize, rows: Vec<Vec<f64>>) -> Points {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        rows[i]
            .iter()
            .zip(rows[j].iter())
            .find_map(|(a, b)| a.partial_cmp(b).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<usize> = Vec::with_capacity(rows.len());
    'outer: for &i in &order {
        // look back over kept points whose leading coordinate is still in range
        for &j in kept.iter().rev() {
            if dim > 0 && (rows[i][0] - rows[j][0]).abs() > DEDUP_TOL {
                break;
            }
            if dist(&rows[i], &rows[j]) <= DEDUP_TOL {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    // keep the original input order among survivors for reproducibility
    kept.sort_unstable();
    let mut pts = Points::with_capacity(dim, kept.len());
    for i in kept {
        pts.push(&rows[i]);
    }
    pts
}

/// Open or closed ball membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ball {
    Open,
    Closed,
}

/// Indices of the cloud points inside a ball around `center`.
#[derive(Debug, Clone)]
pub struct BallSelection {
    pub center: Vec<f64>,
    pub radius: f64,
    pub ball: Ball,
    pub indices: Vec<usize>,
}

impl BallSelection {
    pub fn gather(&self, cloud: &PointCloud) -> Points {
        let mut p = Points::with_capacity(cloud.dim(), self.indices.len());
        for &i in &self.indices {
            p.push(cloud.pt(i));
        }
        p
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// Σ ∩ B_r(x): exactly the sample points with |p − x| < r (or ≤ r if closed).
pub fn restrict_to_ball(cloud: &PointCloud, x: &[f64], r: f64, ball: Ball) -> Result<BallSelection> {
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: x.len() });
    }
    if r <= 0.0 {
        return Err(Error::InvalidParameter("ball radius must be > 0".into()));
    }
    let r2 = r * r;
    let indices = (0..cloud.len())
        .filter(|&i| {
            let d2 = dist2(cloud.pt(i), x);
            match ball {
                Ball::Open => d2 < r2,
                Ball::Closed => d2 <= r2,
            }
        })
        .collect();
    Ok(BallSelection { center: x.to_vec(), radius: r, ball, indices })
}

// ---------------------------------------------------------------------------
// Grid-accelerated exact nearest queries
// ---------------------------------------------------------------------------

/// Uniform-grid index over a fixed point set for exact nearest-distance and
/// fixed-radius queries. Falls back to a linear scan in high dimension or
/// when the ring search would visit too many cells; results are identical
/// either way.
pub struct NearestSet {
    points: Points,
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    gridded: bool,
}

const GRID_MAX_DIM: usize = 3;

impl NearestSet {
    pub fn build(points: Points, cell: f64) -> NearestSet {
        let dim = points.dim();
        let gridded = dim > 0 && dim <= GRID_MAX_DIM && cell > 0.0 && points.len() > 32;
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        if gridded {
            for i in 0..points.len() {
                cells.entry(Self::key(points.pt(i), cell)).or_default().push(i as u32);
            }
        }
        NearestSet { points, cell, cells, gridded }
    }

    fn key(p: &[f64], cell: f64) -> [i64; 3] {
        let mut k = [0i64; 3];
        for (i, &c) in p.iter().enumerate() {
            k[i] = (c / cell).floor() as i64;
        }
        k
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    /// Exact distance from `q` to the nearest indexed point.
    pub fn nearest_dist(&self, q: &[f64]) -> f64 {
        self.nearest(q).1
    }

    /// Exact nearest point index and distance.
    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        self.nearest_above(q, f64::NEG_INFINITY)
    }

    /// Nearest distance with a don't-care floor: the result is exact whenever
    /// it exceeds `floor`; once any point at distance ≤ `floor` is seen the
    /// search stops and returns that distance. Used by directed-Hausdorff
    /// loops where only record-raising points need exact values.
    pub fn nearest_dist_above(&self, q: &[f64], floor: f64) -> f64 {
        self.nearest_above(q, floor).1
    }

    fn nearest_above(&self, q: &[f64], floor: f64) -> (usize, f64) {
        debug_assert!(!self.points.is_empty());
        if !self.gridded {
            return self.nearest_linear_above(q, floor);
        }
        let dim = self.points.dim();
        let center = Self::key(q, self.cell);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut ring: i64 = 0;
        loop {
            // lower bound on distance for cells in ring k (k ≥ 1)
            if ring >= 1 {
                let lb = (ring - 1) as f64 * self.cell;
                if best.1.is_finite() && lb > best.1 {
                    return best;
                }
                // safety valve: ring blow-up means the grid is useless here
                if ring > 4096 {
                    return self.nearest_linear_above(q, floor);
                }
            }
            self.for_each_ring_cell(center, ring, dim, |key| {
                if let Some(v) = self.cells.get(&key) {
                    for &i in v {
                        let d = dist(self.points.pt(i as usize), q);
                        if d < best.1 {
                            best = (i as usize, d);
                        }
                    }
                }
            });
            if best.1 <= floor {
                return best;
            }
            ring += 1;
        }
    }

    fn nearest_linear_above(&self, q: &[f64], floor: f64) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let floor2 = if floor > 0.0 { floor * floor } else { -1.0 };
        for i in 0..self.points.len() {
            let d2 = dist2(self.points.pt(i), q);
            if d2 < best.1 {
                best = (i, d2);
                if d2 <= floor2 {
                    break;
                }
            }
        }
        (best.0, best.1.sqrt())
    }

    fn for_each_ring_cell(&self, c: [i64; 3], ring: i64, dim: usize, mut f: impl FnMut([i64; 3])) {
        match dim {
            1 => {
                if ring == 0 {
                    f(c);
                } else {
                    f([c[0] - ring, 0, 0]);
                    f([c[0] + ring, 0, 0]);
                }
            }
            2 => {
                if ring == 0 {
                    f(c);
                } else {
                    for dx in -ring..=ring {
                        f([c[0] + dx, c[1] - ring, 0]);
                        f([c[0] + dx, c[1] + ring, 0]);
                    }
                    for dy in (-ring + 1)..ring {
                        f([c[0] - ring, c[1] + dy, 0]);
                        f([c[0] + ring, c[1] + dy, 0]);
                    }
                }
            }
            3 => {
                for dx in -ring..=ring {
                    for dy in -ring..=ring {
                        for dz in -ring..=ring {
                            if dx.abs().max(dy.abs()).max(dz.abs()) == ring {
                                f([c[0] + dx, c[1] + dy, c[2] + dz]);
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Visit every indexed point within `radius` of `q` (exact).
    pub fn for_each_within(&self, q: &[f64], radius: f64, mut f: impl FnMut(usize, f64)) {
        if !self.gridded {
            for i in 0..self.points.len() {
                let d = dist(self.points.pt(i), q);
                if d <= radius {
                    f(i, d);
                }
            }
            return;
        }
        let dim = self.points.dim();
        let center = Self::key(q, self.cell);
        let max_ring = (radius / self.cell).ceil() as i64 + 1;
        if max_ring > 512 {
            for i in 0..self.points.len() {
                let d = dist(self.points.pt(i), q);
                if d <= radius {
                    f(i, d);
                }
            }
            return;
        }
        for ring in 0..=max_ring {
            self.for_each_ring_cell(center, ring, dim, |key| {
                if let Some(v) = self.cells.get(&key) {
                    for &i in v {
                        let d = dist(self.points.pt(i as usize), q);
                        if d <= radius {
                            f(i as usize, d);
                        }
                    }
                }
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Hausdorff distances
// ---------------------------------------------------------------------------

/// Reference directed Hausdorff: plain double loop with early exit.
pub fn directed_hausdorff_naive(a: &impl PointSet, b: &impl PointSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedAtScale("empty set in Hausdorff distance".into()));
    }
    let mut max_min = 0.0f64;
    for i in 0..a.len() {
        let p = a.pt(i);
        let mut min_d2 = f64::INFINITY;
        let cutoff = max_min * max_min;
        for j in 0..b.len() {
            let d2 = dist2(p, b.pt(j));
            if d2 < min_d2 {
                min_d2 = d2;
                if min_d2 <= cutoff {
                    break; // this point cannot raise the max
                }
            }
        }
        if min_d2 > cutoff {
            max_min = min_d2.sqrt();
        }
    }
    Ok(max_min)
}

/// Reference symmetric Hausdorff distance (naive scans both ways).
pub fn hausdorff_naive(a: &impl PointSet, b: &impl PointSet) -> Result<f64> {
    Ok(directed_hausdorff_naive(a, b)?.max(directed_hausdorff_naive(b, a)?))
}

fn directed_via_index(a: &impl PointSet, b: &NearestSet) -> f64 {
    let mut max_min = 0.0f64;
    for i in 0..a.len() {
        let d = b.nearest_dist(a.pt(i));
        if d > max_min {
            max_min = d;
        }
    }
    max_min
}

/// Symmetric Hausdorff distance between two finite sets.
///
/// Exact; grid acceleration is used for large low-dimensional inputs and is
/// value-identical to [`hausdorff_naive`].
pub fn hausdorff(a: &impl PointSet, b: &impl PointSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedAtScale("empty set in Hausdorff distance".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let big = a.len().max(b.len());
    if a.dim() <= GRID_MAX_DIM && big > 2048 {
        let cell = estimate_cell(b);
        let bi = NearestSet::build(copy_points(b), cell);
        let d1 = directed_via_index(a, &bi);
        let ai = NearestSet::build(copy_points(a), estimate_cell(a));
        let d2 = directed_via_index(b, &ai);
        Ok(d1.max(d2))
    } else {
        hausdorff_naive(a, b)
    }
}

fn copy_points(s: &impl PointSet) -> Points {
    let mut p = Points::with_capacity(s.dim(), s.len());
    for i in 0..s.len() {
        p.push(s.pt(i));
    }
    p
}

fn estimate_cell(s: &impl PointSet) -> f64 {
    // bounding-box heuristic: aim for O(1) points per cell on a curve/surface
    let dim = s.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for i in 0..s.len() {
        for (k, &c) in s.pt(i).iter().enumerate() {
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    let span = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    span / (s.len() as f64).max(2.0) * 8.0
}

// ---------------------------------------------------------------------------
// Plane patch nets
// ---------------------------------------------------------------------------

/// A finite net of an affine plane patch (x+L) ∩ B̄_r(x) with covering radius
/// ≤ h, stored with its plane coordinates for fast exact nearest queries.
pub struct PatchNet {
    plane: AffinePlane,
    /// Net points in ambient coordinates.
    points: Points,
    index: PatchIndex,
}

enum PatchIndex {
    /// m = 1: sorted coordinates, binary-searched.
    Sorted(Vec<f64>),
    /// m ≥ 2: grid over plane coordinates.
    Grid(NearestSet),
}

impl PatchNet {
    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Exact distance from an ambient point to the nearest net point.
    ///
    /// Splits z − x into plane coordinates c and a perpendicular part w;
    /// every net point lies in the patch, so |z − p|² = |w|² + |c − c_p|².
    pub fn nearest_dist(&self, z: &DVector<f64>) -> f64 {
        let rel = z - &self.plane.base;
        let c = self.plane.direction.frame().transpose() * &rel;
        let w2 = (rel.norm_squared() - c.norm_squared()).max(0.0);
        let dc = match &self.index {
            PatchIndex::Sorted(xs) => nearest_in_sorted(xs, c[0]),
            PatchIndex::Grid(g) => g.nearest_dist(c.as_slice()),
        };
        (w2 + dc * dc).sqrt()
    }
}

fn nearest_in_sorted(xs: &[f64], t: f64) -> f64 {
    debug_assert!(!xs.is_empty());
    match xs.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(_) => 0.0,
        Err(i) => {
            let mut best = f64::INFINITY;
            if i < xs.len() {
                best = best.min(xs[i] - t);
            }
            if i > 0 {
                best = best.min(t - xs[i - 1]);
            }
            best
        }
    }
}

/// Build a finite stand-in for (x+L) ∩ B̄_r(x): a lattice of spacing h/√m in
/// plane coordinates, clamped radially into the closed disk, always
/// containing x. Covering radius ≤ h.
pub fn plane_patch_net(q: &AffinePlane, x: &DVector<f64>, r: f64, h: f64) -> Result<PatchNet> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter("patch net resolution h must be > 0".into()));
    }
    if h > r {
        return Err(Error::InvalidParameter("patch net needs h ≤ r".into()));
    }
    if x.len() != q.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: q.ambient_dim(), got: x.len() });
    }
    // x must lie on Q
    let px = q.project(x)?;
    if (&px - x).norm() > 1e-9 * x.norm().max(1.0) {
        return Err(Error::Precondition("patch center x does not lie on the affine plane".into()));
    }
    let m = q.direction.dim();
    let s = h / (m as f64).sqrt();
    let kmax = (r / s).floor() as i64 + 1;

    let rebased = AffinePlane::new(x.clone(), q.direction.clone())?;
    let frame = rebased.direction.frame().clone();

    let mut coord_rows: Vec<Vec<f64>> = Vec::new();
    let mut lattice = vec![-kmax; m];
    'lattice: loop {
        let c: Vec<f64> = lattice.iter().map(|&k| k as f64 * s).collect();
        let norm2: f64 = c.iter().map(|v| v * v).sum();
        let norm = norm2.sqrt();
        if norm <= r {
            coord_rows.push(c);
        } else if norm <= r + s * (m as f64).sqrt() {
            // clamp just-outside lattice points radially onto the sphere
            let scale = r / norm;
            coord_rows.push(c.iter().map(|v| v * scale).collect());
        }
        // advance odometer
        for d in 0..m {
            lattice[d] += 1;
            if lattice[d] <= kmax {
                continue 'lattice;
            }
            lattice[d] = -kmax;
        }
        break;
    }
    // dedup clamped collisions at lattice resolution
    let coords = dedup(m, coord_rows);

    let mut pts = Points::with_capacity(x.len(), coords.len());
    let mut row = vec![0.0; x.len()];
    for c in coords.iter() {
        for (i, v) in row.iter_mut().enumerate() {
            let mut acc = x[i];
            for (j, &cj) in c.iter().enumerate() {
                acc += frame[(i, j)] * cj;
            }
            *v = acc;
        }
        pts.push(&row);
    }
    let index = if m == 1 {
        let mut xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        PatchIndex::Sorted(xs)
    } else {
        PatchIndex::Grid(NearestSet::build(coords, s.max(r / 32.0)))
    };
    Ok(PatchNet { plane: rebased, points: pts, index })
}

/// Evaluate the θ objective at one fixed plane: (1/r) · dist_H between the
/// sample inside the open ball B_r(x) and a finite net of (x+L) ∩ B̄_r(x).
pub fn theta_of_plane(
    cloud: &PointCloud,
    x: &DVector<f64>,
    r: f64,
    q: &AffinePlane,
    net_h: f64,
) -> Result<f64> {
    let sel = restrict_to_ball(cloud, x.as_slice(), r, Ball::Open)?;
    if sel.is_empty() {
        return Err(Error::UndefinedAtScale(format!("no sample points in B_{r}(x)")));
    }
    let sample = sel.gather(cloud);
    theta_of_plane_on(&sample, x, r, q, net_h)
}

/// As [`theta_of_plane`] on an already-gathered ball sample.
pub fn theta_of_plane_on(
    sample: &Points,
    x: &DVector<f64>,
    r: f64,
    q: &AffinePlane,
    net_h: f64,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::UndefinedAtScale("empty ball selection".into()));
    }
    let net = plane_patch_net(q, x, r, net_h)?;
    // sample → net via the patch decomposition
    let mut d1 = 0.0f64;
    for p in sample.iter() {
        let v = DVector::from_column_slice(p);
        d1 = d1.max(net.nearest_dist(&v));
    }
    // net → sample
    let d2 = if sample.len() > 2048 && sample.dim() <= GRID_MAX_DIM {
        let idx = NearestSet::build(copy_points(sample), estimate_cell(sample));
        directed_via_index(net.points(), &idx)
    } else {
        directed_hausdorff_naive(net.points(), sample)?
    };
    Ok(d1.max(d2) / r)
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// The example sets. All are curves in ℝ² except where noted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// Straight segment (t, 0), t ∈ domain.
    Line { domain: (f64, f64) },
    /// Circle of the given radius about the origin; `arc` restricts to an
    /// angular window (radians).
    Circle { radius: f64, arc: Option<(f64, f64)> },
    /// Graph of t ↦ δ|t| — Lipschitz but not C¹ at the apex.
    ConeGraph { delta: f64, domain: (f64, f64) },
    /// Graph of the truncated series Σ_{k=1}^K cos(2^k t)/(2^k √k) — flat
    /// with vanishing constant in the limit, nowhere differentiable.
    WeierstrassGraph { terms: usize, domain: (f64, f64) },
    /// Graph of the even C¹ function with derivative (−2/log(y²))^{1/β},
    /// extended linearly beyond |t| = 1/2.
    LogExampleGraph { beta: f64, domain: (f64, f64) },
    /// Graph of t ↦ α·sin(t) — a C¹ control with Lipschitz constant α.
    SineGraph { alpha: f64, domain: (f64, f64) },
    /// Graph through explicit (t, f(t)) samples.
    C1Graph { table: Vec<(f64, f64)> },
}

/// Lipschitz bound of the truncated series' derivative: Σ_{k=1}^K 1/√k.
pub fn weierstrass_lipschitz(terms: usize) -> f64 {
    (1..=terms).map(|k| 1.0 / (k as f64).sqrt()).sum()
}

/// u_K(z) = Σ_{k=1}^K cos(2^k z)/(2^k √k).
pub fn weierstrass_value(terms: usize, z: f64) -> f64 {
    let mut s = 0.0;
    let mut pow = 1.0f64;
    for k in 1..=terms {
        pow *= 2.0;
        s += (pow * z).cos() / (pow * (k as f64).sqrt());
    }
    s
}

/// Integrand of the logarithmic example: (−2/log(y²))^{1/β}, 0 at y = 0.
pub fn log_example_integrand(beta: f64, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let t = -1.0 / y.abs().ln(); // = −2/log(y²)
    if t <= 0.0 {
        return f64::NAN; // |y| ≥ 1 is outside the admissible domain
    }
    t.powf(1.0 / beta)
}

/// Adaptive Simpson quadrature with absolute tolerance.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// g_β(x): the even primitive of the logarithmic integrand on |x| ≤ 1/2 with
/// linear extension of slope (1/log 2)^{1/β} beyond.
pub fn log_example_value(beta: f64, x: f64) -> f64 {
    let slope = (1.0 / std::f64::consts::LN_2).powf(1.0 / beta);
    let t = x.abs();
    if t <= 0.5 {
        adaptive_simpson(&|y| log_example_integrand(beta, y), 0.0, t, 1e-12)
    } else {
        let at_half = adaptive_simpson(&|y| log_example_integrand(beta, y), 0.0, 0.5, 1e-12);
        at_half + (t - 0.5) * slope
    }
}

/// Sample an example set at the given parameter step.
///
/// The declared resolution is `step × √(1 + L²)` for a graph generator with
/// derivative bound L (consecutive-sample spacing bound), and the arc step
/// for the circle.
pub fn generate(kind: &GeneratorKind, step: f64) -> Result<PointCloud> {
    if step <= 0.0 {
        return Err(Error::InvalidParameter("sampling step must be > 0".into()));
    }
    let grid = |dom: (f64, f64)| -> Result<Vec<f64>> {
        if dom.1 <= dom.0 {
            return Err(Error::InvalidParameter("empty generator domain".into()));
        }
        let k0 = (dom.0 / step).ceil() as i64;
        let k1 = (dom.1 / step).floor() as i64;
        Ok((k0..=k1).map(|k| k as f64 * step).collect())
    };
    let graph_cloud = |ts: Vec<f64>, f: &dyn Fn(f64) -> f64, lip: f64, label: String| -> Result<PointCloud> {
        let rows: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t, f(t)]).collect();
        let h = step * (1.0 + lip * lip).sqrt();
        PointCloud::new(2, rows, h, &label)
    };
    match kind {
        GeneratorKind::Line { domain } => graph_cloud(
            grid(*domain)?,
            &|_| 0.0,
            0.0,
            format!("line domain=[{},{}] step={step}", domain.0, domain.1),
        ),
        GeneratorKind::Circle { radius, arc } => {
            if *radius <= 0.0 {
                return Err(Error::InvalidParameter("circle radius must be > 0".into()));
            }
            let ang = step / radius;
            let (a0, a1) = match arc {
                Some(w) => *w,
                None => (0.0, 2.0 * std::f64::consts::PI - 0.5 * ang),
            };
            if a1 <= a0 {
                return Err(Error::InvalidParameter("empty circle arc".into()));
            }
            let k0 = (a0 / ang).ceil() as i64;
            let k1 = (a1 / ang).floor() as i64;
            let rows: Vec<Vec<f64>> = (k0..=k1)
                .map(|k| {
                    let a = k as f64 * ang;
                    vec![radius * a.cos(), radius * a.sin()]
                })
                .collect();
            let label = match arc {
                Some(w) => format!("circle radius={radius} arc=[{},{}] step={step}", w.0, w.1),
                None => format!("circle radius={radius} step={step}"),
            };
            PointCloud::new(2, rows, step, &label)
        }
        GeneratorKind::ConeGraph { delta, domain } => {
            if *delta <= 0.0 {
                return Err(Error::InvalidParameter("cone slope δ must be > 0".into()));
            }
            let d = *delta;
            graph_cloud(
                grid(*domain)?,
                &move |t: f64| d * t.abs(),
                d,
                format!("cone_graph delta={delta} domain=[{},{}] step={step}", domain.0, domain.1),
            )
        }
        GeneratorKind::WeierstrassGraph { terms, domain } => {
            if *terms == 0 {
                return Err(Error::InvalidParameter("series needs K ≥ 1 terms".into()));
            }
            let kk = *terms;
            let lip = weierstrass_lipschitz(kk);
            let cloud = graph_cloud(
                grid(*domain)?,
                &move |t: f64| weierstrass_value(kk, t),
                lip,
                format!(
                    "weierstrass_graph terms={terms} domain=[{},{}] step={step}",
                    domain.0, domain.1
                ),
            )?;
            // truncation floor: Σ_{k>K} 2^{-k}/√k < 2^{-K} perturbs geometry
            // below scale ~2^{-K+4}
            Ok(cloud.with_min_reliable_scale((2.0f64).powi(-(kk as i32) + 4)))
        }
        GeneratorKind::LogExampleGraph { beta, domain } => {
            if *beta < 1.0 {
                return Err(Error::InvalidParameter("log example needs β ≥ 1".into()));
            }
            let b = *beta;
            let ts = grid(*domain)?;
            // integrate incrementally over the sorted |t| grid; g is even
            let mut mags: Vec<f64> = ts.iter().map(|t| t.abs()).collect();
            mags.sort_by(|a, c| a.partial_cmp(c).unwrap());
            mags.dedup();
            let mut gval: HashMap<u64, f64> = HashMap::new();
            let mut acc = 0.0;
            let mut prev = 0.0f64;
            let slope = (1.0 / std::f64::consts::LN_2).powf(1.0 / b);
            for &t in &mags {
                let lo = prev.min(0.5);
                let hi = t.min(0.5);
                if hi > lo {
                    acc += adaptive_simpson(&|y| log_example_integrand(b, y), lo, hi, 1e-13);
                }
                let v = if t <= 0.5 { acc } else { acc + (t - 0.5) * slope };
                gval.insert(t.to_bits(), v);
                prev = t;
            }
            let lip = slope.max(log_example_integrand(b, 0.5));
            let rows: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t, gval[&t.abs().to_bits()]]).collect();
            let h = step * (1.0 + lip * lip).sqrt();
            PointCloud::new(
                2,
                rows,
                h,
                &format!("log_example_graph beta={beta} domain=[{},{}] step={step}", domain.0, domain.1),
            )
        }
        GeneratorKind::SineGraph { alpha, domain } => {
            if *alpha <= 0.0 {
                return Err(Error::InvalidParameter("sine graph needs α > 0".into()));
            }
            let a = *alpha;
            graph_cloud(
                grid(*domain)?,
                &move |t: f64| a * t.sin(),
                a,
                format!("sine_graph alpha={alpha} domain=[{},{}] step={step}", domain.0, domain.1),
            )
        }
        GeneratorKind::C1Graph { table } => {
            if table.len() < 2 {
                return Err(Error::InvalidParameter("function table needs ≥ 2 entries".into()));
            }
            let mut sorted = table.clone();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let rows: Vec<Vec<f64>> = sorted.iter().map(|&(t, v)| vec![t, v]).collect();
            let h = rows
                .windows(2)
                .map(|w| dist(&w[0], &w[1]))
                .fold(0.0f64, f64::max);
            PointCloud::new(2, rows, h.max(1e-300), &format!("c1_graph entries={}", table.len()))
        }
    }
}

/// Total variation of the ordinate sequence of a graph cloud sorted by its
/// first coordinate. Errors if the parameterization is not strictly sorted.
pub fn total_variation(cloud: &PointCloud) -> Result<f64> {
    if cloud.dim() < 2 {
        return Err(Error::InvalidParameter("total variation needs a graph cloud".into()));
    }
    if cloud.len() < 2 {
        return Ok(0.0);
    }
    let mut tv = 0.0;
    for i in 1..cloud.len() {
        let prev = cloud.pt(i - 1);
        let cur = cloud.pt(i);
        if cur[0] <= prev[0] {
            return Err(Error::InvalidParameter(
                "cloud is not sorted by its graph parameter (unsorted or ambiguous)".into(),
            ));
        }
        tv += dist(&cur[1..], &prev[1..]);
    }
    Ok(tv)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CloudRepr {
    ambient_dim: usize,
    resolution: f64,
    label: String,
    min_reliable_scale: Option<f64>,
    points: Vec<Vec<f64>>,
}

impl Serialize for PointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CloudRepr {
            ambient_dim: self.dim(),
            resolution: self.resolution,
            label: self.label.clone(),
            min_reliable_scale: self.min_reliable_scale,
            points: self.points.iter().map(|p| p.to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<PointCloud, D::Error> {
        let repr = CloudRepr::deserialize(d)?;
        let mut cloud = PointCloud::new(repr.ambient_dim, repr.points, repr.resolution, &repr.label)
            .map_err(serde::de::Error::custom)?;
        cloud.min_reliable_scale = repr.min_reliable_scale;
        Ok(cloud)
    }
}

impl PointCloud {
    /// CSV with `#`-comment header lines carrying n, h, and the label.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# n={}", self.dim());
        let _ = writeln!(out, "# h={:e}", self.resolution);
        if let Some(s) = self.min_reliable_scale {
            let _ = writeln!(out, "# min_reliable_scale={s:e}");
        }
        let _ = writeln!(out, "# label={}", self.label);
        for p in self.points.iter() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<PointCloud> {
        let mut n: Option<usize> = None;
        let mut h: Option<f64> = None;
        let mut label = String::new();
        let mut floor: Option<f64> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("n=") {
                    n = Some(v.trim().parse().map_err(|_| Error::InvalidParameter("bad n header".into()))?);
                } else if let Some(v) = rest.strip_prefix("h=") {
                    h = Some(v.trim().parse().map_err(|_| Error::InvalidParameter("bad h header".into()))?);
                } else if let Some(v) = rest.strip_prefix("min_reliable_scale=") {
                    floor = v.trim().parse().ok();
                } else if let Some(v) = rest.strip_prefix("label=") {
                    label = v.trim().to_string();
                }
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|_| Error::InvalidParameter(format!("bad CSV row: {line}")))?);
        }
        let n = n.ok_or_else(|| Error::InvalidParameter("missing `# n=` header".into()))?;
        let h = h.ok_or_else(|| Error::InvalidParameter("missing `# h=` header".into()))?;
        let mut cloud = PointCloud::new(n, rows, h, &label)?;
        cloud.min_reliable_scale = floor;
        Ok(cloud)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<PointCloud> {
        PointCloud::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<PointCloud> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Greedy farthest-point net: indices whose balls of the given radius cover
/// every point of the set. The point nearest `anchor` is always included
/// first, so the anchor itself is covered at index 0 when it is a set member.
pub fn greedy_net(points: &impl PointSet, anchor: &[f64], radius: f64) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut first = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        let d = dist2(points.pt(i), anchor);
        if d < best {
            best = d;
            first = i;
        }
    }
    let mut net = vec![first];
    let mut d2: Vec<f64> = (0..points.len())
        .map(|i| dist2(points.pt(i), points.pt(first)))
        .collect();
    let r2 = radius * radius;
    loop {
        let (mut far, mut fd) = (0usize, -1.0f64);
        for (i, &d) in d2.iter().enumerate() {
            if d > fd {
                fd = d;
                far = i;
            }
        }
        if fd <= r2 {
            break;
        }
        net.push(far);
        for i in 0..points.len() {
            let nd = dist2(points.pt(i), points.pt(far));
            if nd < d2[i] {
                d2[i] = nd;
            }
        }
    }
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::Plane;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x, y])
    }

    fn unit_circle(n: usize, radius: f64) -> PointCloud {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect();
        PointCloud::new(2, rows, 2.0 * std::f64::consts::PI * radius / n as f64, "circle").unwrap()
    }

    #[test]
    fn dedup_collapses_identical_points() {
        let c = PointCloud::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 5e-15]],
            0.1,
            "t",
        )
        .unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn restrict_ball_examples() {
        let c = unit_circle(100, 1.0);
        let all = restrict_to_ball(&c, &[1.0, 0.0], 10.0, Ball::Open).unwrap();
        assert_eq!(all.len(), c.len());
        let none = restrict_to_ball(&c, &[5.0, 0.0], 0.5, Ball::Open).unwrap();
        assert!(none.is_empty());

        // 1000-point line sample on [-1,1], x = 0, r = 0.5: brute-force count
        let line = generate(&GeneratorKind::Line { domain: (-1.0, 1.0) }, 2e-3).unwrap();
        let sel = restrict_to_ball(&line, &[0.0, 0.0], 0.5, Ball::Open).unwrap();
        let brute = (0..line.len()).filter(|&i| dist(line.pt(i), &[0.0, 0.0]) < 0.5).count();
        assert_eq!(sel.len(), brute);
        assert!(sel.len() > 0);
    }

    #[test]
    fn nested_ball_monotonicity() {
        let c = unit_circle(500, 1.0);
        let s1 = restrict_to_ball(&c, &[1.0, 0.0], 0.3, Ball::Open).unwrap();
        let s2 = restrict_to_ball(&c, &[1.0, 0.0], 0.9, Ball::Open).unwrap();
        for i in &s1.indices {
            assert!(s2.indices.contains(i));
        }
    }

    #[test]
    fn hausdorff_basics() {
        let a = Points::from_rows(2, &[vec![0.0, 0.0]]);
        let b = Points::from_rows(2, &[vec![3.0, 4.0]]);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert!((hausdorff(&a, &b).unwrap() - 5.0).abs() < 1e-15);
        let empty = Points::new(2);
        assert!(matches!(hausdorff(&a, &empty), Err(Error::UndefinedAtScale(_))));
    }

    #[test]
    fn hausdorff_concentric_circles() {
        // matched angular grids: radial correspondence is optimal
        let a = unit_circle(100, 1.0);
        let b = unit_circle(100, 1.1);
        let d = hausdorff(a.points(), b.points()).unwrap();
        assert!((d - 0.1).abs() < 1e-12, "got {d}");
        let naive = hausdorff_naive(a.points(), b.points()).unwrap();
        assert_eq!(d, naive);
    }

    #[test]
    fn hausdorff_metric_triangle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let mk = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(1..8);
                Points::from_rows(
                    2,
                    &(0..n)
                        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                        .collect::<Vec<_>>(),
                )
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let c = mk(&mut rng);
            let ab = hausdorff(&a, &b).unwrap();
            let bc = hausdorff(&b, &c).unwrap();
            let ac = hausdorff(&a, &c).unwrap();
            assert!((ab - hausdorff(&b, &a).unwrap()).abs() == 0.0);
            assert!(ab + bc - ac >= -1e-12);
        }
    }

    #[test]
    fn grid_index_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = Points::from_rows(
            2,
            &(0..3000)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect::<Vec<_>>(),
        );
        let idx = NearestSet::build(pts.clone(), 0.05);
        for _ in 0..200 {
            let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let fast = idx.nearest_dist(&q);
            let mut slow = f64::INFINITY;
            for p in pts.iter() {
                slow = slow.min(dist(p, &q));
            }
            assert!((fast - slow).abs() < 1e-15);
        }
    }

    #[test]
    fn patch_net_line_example() {
        // m = 1, r = 1, h = 0.1 → 21-point symmetric grid with ±1 endpoints
        let q = AffinePlane::new(v2(0.0, 0.0), Plane::new(&[v2(1.0, 0.0)]).unwrap()).unwrap();
        let net = plane_patch_net(&q, &v2(0.0, 0.0), 1.0, 0.1).unwrap();
        assert_eq!(net.len(), 21);
        let xs: Vec<f64> = net.points().iter().map(|p| p[0]).collect();
        let mn = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((mn + 1.0).abs() < 1e-12 && (mx - 1.0).abs() < 1e-12);
        assert!(net.points().iter().any(|p| p[0].abs() < 1e-15));
    }

    #[test]
    fn patch_net_minimal_contract() {
        // h = r still contains x and a point in each direction
        let q = AffinePlane::new(v2(0.0, 0.0), Plane::new(&[v2(1.0, 0.0)]).unwrap()).unwrap();
        let net = plane_patch_net(&q, &v2(0.0, 0.0), 0.5, 0.5).unwrap();
        let xs: Vec<f64> = net.points().iter().map(|p| p[0]).collect();
        assert!(xs.iter().any(|&t| t.abs() < 1e-15));
        assert!(xs.iter().any(|&t| t > 0.0) && xs.iter().any(|&t| t < 0.0));
    }

    #[test]
    fn patch_net_covering_monte_carlo() {
        // m = 2 patch in ℝ³, r = 1, h = 0.05: every random patch point within h
        let pl = Plane::new(&[
            DVector::from_column_slice(&[1.0, 0.0, 0.4]),
            DVector::from_column_slice(&[0.0, 1.0, -0.3]),
        ])
        .unwrap();
        let x = DVector::from_column_slice(&[0.2, -0.1, 0.05]);
        let base = pl.project(&x).unwrap() + pl.project_perp(&x).unwrap(); // x itself
        let q = AffinePlane::new(base.clone(), pl.clone()).unwrap();
        let net = plane_patch_net(&q, &base, 1.0, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            // random point of the closed patch
            let (a, b) = loop {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                if a * a + b * b <= 1.0 {
                    break (a, b);
                }
            };
            let p = &base + pl.frame().column(0) * a + pl.frame().column(1) * b;
            assert!(net.nearest_dist(&p) <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn patch_net_nearest_matches_brute() {
        let pl = Plane::new(&[v2(1.0, 0.3)]).unwrap();
        let x = v2(0.1, 0.03);
        let q = AffinePlane::new(x.clone(), pl).unwrap();
        let net = plane_patch_net(&q, &x, 0.7, 0.02).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let z = v2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let fast = net.nearest_dist(&z);
            let mut slow = f64::INFINITY;
            for p in net.points().iter() {
                slow = slow.min(dist(p, z.as_slice()));
            }
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_of_plane_self_approximation() {
        let line = generate(&GeneratorKind::Line { domain: (-1.0, 1.0) }, 1e-3).unwrap();
        let q = AffinePlane::new(v2(0.0, 0.0), Plane::new(&[v2(1.0, 0.0)]).unwrap()).unwrap();
        let r = 0.8;
        let net_h = 0.01;
        let th = theta_of_plane(&line, &v2(0.0, 0.0), r, &q, net_h).unwrap();
        assert!(th <= (line.resolution() + net_h) / r, "got {th}");
    }

    #[test]
    fn theta_of_plane_two_points_vs_transverse_axis() {
        // S = {(±r/2, 0)}, Q = y-axis: both directed distances enumerated
        let r = 1.0;
        let cloud = PointCloud::new(2, vec![vec![0.5, 0.0], vec![-0.5, 0.0]], 1e-3, "pair").unwrap();
        let q = AffinePlane::new(v2(0.0, 0.0), Plane::new(&[v2(0.0, 1.0)]).unwrap()).unwrap();
        let net_h = 1e-3;
        let th = theta_of_plane(&cloud, &v2(0.0, 0.0), r, &q, net_h).unwrap();
        // oracle: sample→net min dist = 0.5 (foot of perpendicular);
        // net→sample sup at (0, ±r): √(r² + r²/4) = √5/2
        let oracle = (1.25f64).sqrt();
        assert!((th - oracle).abs() < 2.0 * net_h, "got {th}, oracle {oracle}");
    }

    #[test]
    fn theta_of_plane_cone_vs_axis() {
        let delta = 0.1;
        let cone = generate(&GeneratorKind::ConeGraph { delta, domain: (-1.5, 1.5) }, 5e-4).unwrap();
        let q = AffinePlane::new(v2(0.0, 0.0), Plane::new(&[v2(1.0, 0.0)]).unwrap()).unwrap();
        let th = theta_of_plane(&cone, &v2(0.0, 0.0), 1.0, &q, 2e-3).unwrap();
        let expect = delta / (1.0 + delta * delta).sqrt();
        assert!((th - expect).abs() < 4e-3, "got {th}, expect {expect}");
    }

    #[test]
    fn theta_refinement_is_bounded_by_net_change() {
        let cone = generate(&GeneratorKind::ConeGraph { delta: 0.2, domain: (-1.5, 1.5) }, 1e-3).unwrap();
        let q = AffinePlane::new(v2(0.0, 0.0), Plane::new(&[v2(1.0, 0.0)]).unwrap()).unwrap();
        let r = 1.0;
        let h1 = 0.02;
        let h2 = 0.01;
        let t1 = theta_of_plane(&cone, &v2(0.0, 0.0), r, &q, h1).unwrap();
        let t2 = theta_of_plane(&cone, &v2(0.0, 0.0), r, &q, h2).unwrap();
        assert!((t1 - t2).abs() <= (h1 - h2) / r + 1e-12);
    }

    #[test]
    fn generate_cone_examples() {
        let c = generate(&GeneratorKind::ConeGraph { delta: 0.3, domain: (-1.0, 1.0) }, 1e-3).unwrap();
        assert!(c.resolution() <= 1e-3 * (1.09f64).sqrt() + 1e-15);
        for i in 0..c.len() {
            let p = c.pt(i);
            assert!((p[1] - 0.3 * p[0].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn generate_log_example_matches_quadrature_oracle() {
        // frozen: ∫₀^{0.25} (−2/log y²) dy computed by adaptive quadrature
        const G1_QUARTER: f64 = 0.11866205644712310531;
        let c = generate(&GeneratorKind::LogExampleGraph { beta: 1.0, domain: (-0.5, 0.5) }, 0.00125).unwrap();
        let hit = (0..c.len()).find(|&i| (c.pt(i)[0] - 0.25).abs() < 1e-12).unwrap();
        assert!((c.pt(hit)[1] - G1_QUARTER).abs() < 1e-10, "got {}", c.pt(hit)[1]);

        // independent oracle: Gauss-Legendre 5-point on a mesh graded
        // geometrically toward the singular derivative at 0
        let gl_nodes = [
            -0.906179845938664,
            -0.538469310105683,
            0.0,
            0.538469310105683,
            0.906179845938664,
        ];
        let gl_w = [
            0.236926885056189,
            0.478628670499366,
            0.568888888888889,
            0.478628670499366,
            0.236926885056189,
        ];
        let mut acc = 0.0;
        // panels [0.25·2^{-(k+1)}, 0.25·2^{-k}], each split uniformly in 64
        for k in 0..120 {
            let hi = 0.25 * (2.0f64).powi(-k);
            let lo = 0.5 * hi;
            for j in 0..64 {
                let a = lo + (hi - lo) * j as f64 / 64.0;
                let b = lo + (hi - lo) * (j + 1) as f64 / 64.0;
                for (x, w) in gl_nodes.iter().zip(gl_w.iter()) {
                    let y = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    acc += 0.5 * (b - a) * w * log_example_integrand(1.0, y);
                }
            }
        }
        // the remaining [0, 0.25·2^-120] tail is below 1e-37
        assert!((acc - G1_QUARTER).abs() < 1e-10, "oracle drift: {acc}");
    }

    #[test]
    fn generate_weierstrass_matches_sum_oracle() {
        // frozen 20-term sum at z = 0
        const U20_AT_0: f64 = 0.80612651943246957133;
        let c = generate(&GeneratorKind::WeierstrassGraph { terms: 20, domain: (-0.5, 0.5) }, 1e-3).unwrap();
        let hit = (0..c.len()).find(|&i| c.pt(i)[0].abs() < 1e-12).unwrap();
        assert!((c.pt(hit)[1] - U20_AT_0).abs() < 1e-12);
        assert!(c.min_reliable_scale().unwrap() > 0.0);
    }

    #[test]
    fn generator_resolution_contract() {
        // random ideal points of each set lie within declared h of the cloud
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sets: Vec<(PointCloud, Box<dyn Fn(f64) -> Vec<f64>>)> = vec![
            (
                generate(&GeneratorKind::ConeGraph { delta: 0.2, domain: (-1.0, 1.0) }, 1e-3).unwrap(),
                Box::new(|t: f64| vec![t, 0.2 * t.abs()]),
            ),
            (
                generate(&GeneratorKind::SineGraph { alpha: 0.1, domain: (-1.0, 1.0) }, 1e-3).unwrap(),
                Box::new(|t: f64| vec![t, 0.1 * t.sin()]),
            ),
            (
                generate(&GeneratorKind::Circle { radius: 1.0, arc: None }, 1e-3).unwrap(),
                Box::new(|t: f64| vec![t.cos(), t.sin()]),
            ),
        ];
        for (cloud, ideal) in &sets {
            let idx = NearestSet::build(cloud.points().clone(), cloud.resolution() * 8.0);
            for _ in 0..100 {
                let t = rng.gen_range(-0.9..0.9);
                let p = ideal(t);
                assert!(
                    idx.nearest_dist(&p) <= cloud.resolution() + 1e-12,
                    "{} failed resolution contract",
                    cloud.label()
                );
            }
        }
    }

    #[test]
    fn total_variation_examples() {
        let mono = PointCloud::new(
            2,
            (0..=100).map(|k| vec![k as f64 / 100.0, k as f64 / 100.0]).collect(),
            0.02,
            "id",
        )
        .unwrap();
        assert!((total_variation(&mono).unwrap() - 1.0).abs() < 1e-12);

        let cone = generate(&GeneratorKind::ConeGraph { delta: 1.0, domain: (-1.0, 1.0) }, 1e-3).unwrap();
        assert!((total_variation(&cone).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn weierstrass_tv_increases_with_truncation() {
        let step = (2.0f64).powi(-20);
        let mut prev = 0.0;
        for terms in [8usize, 12, 16] {
            let c = generate(&GeneratorKind::WeierstrassGraph { terms, domain: (-0.25, 0.25) }, step).unwrap();
            let tv = total_variation(&c).unwrap();
            assert!(tv > prev, "TV must increase with K: {tv} vs {prev}");
            prev = tv;
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = generate(&GeneratorKind::ConeGraph { delta: 0.2, domain: (-0.1, 0.1) }, 1e-2).unwrap();
        let text = c.to_csv();
        let back = PointCloud::from_csv(&text).unwrap();
        assert_eq!(back.len(), c.len());
        assert_eq!(back.dim(), 2);
        assert!((back.resolution() - c.resolution()).abs() < 1e-18);
        assert_eq!(back.label(), c.label());
        for i in 0..c.len() {
            assert!(dist(c.pt(i), back.pt(i)) < 1e-12);
        }
    }

    #[test]
    fn greedy_net_covers() {
        let c = unit_circle(2000, 1.0);
        let net = greedy_net(c.points(), &[1.0, 0.0], 0.1);
        for i in 0..c.len() {
            let d = net.iter().map(|&j| dist(c.pt(i), c.pt(j))).fold(f64::INFINITY, f64::min);
            assert!(d <= 0.1 + 1e-12);
        }
        // anchor is the first net point
        assert!(dist(c.pt(net[0]), &[1.0, 0.0]) < 1e-9);
    }
}
