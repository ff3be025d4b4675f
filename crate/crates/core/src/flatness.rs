//! θ-number and β-number evaluation: optimization over G(n,m) of the
//! scale-normalized distance objectives, and assembly of multiscale profiles.
//!
//! θ_Σ(x,r) is the two-sided Hausdorff objective between the sample inside
//! B_r(x) and a finite net of the best affine plane patch through x;
//! β_Σ(x,r) is the one-sided sup of distances from the sample to the best
//! affine plane (no patch term, full plane). β ≤ θ pointwise.
//!
//! The optimizer is PCA initialization (centered at x, not the centroid —
//! approximating planes pass through x) followed by random orthonormal-frame
//! perturbations with shrinking step, plus seeded random restarts. The n = 2
//! angle-sweep oracle in the tests certifies it in the plane.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grassmann::{AffinePlane, Plane};
use crate::pointsets::{
    plane_patch_net, restrict_to_ball, Ball, NearestSet, PointCloud, PointSet, Points,
};

/// Options for the plane-fit optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of optimization starts (PCA start plus `restarts − 1` random).
    pub restarts: usize,
    /// Local refinement iterations per start.
    pub refine_steps: usize,
    /// Plane-net resolution as a fraction of r; must lie in (0, 1/10].
    pub patch_h: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 4, refine_steps: 60, patch_h: 1.0 / 50.0, seed: 0 }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be ≥ 1".into()));
        }
        if !(self.patch_h > 0.0 && self.patch_h <= 0.1) {
            return Err(Error::InvalidParameter("patch_h must lie in (0, 1/10]".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Result of a plane fit at one (x, r).
#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub plane: Plane,
    pub value: f64,
    /// Fewer than m+1 affinely independent points in the ball.
    pub degenerate: bool,
}

/// Cached per-(x,r) evaluation context: the ball sample and its spatial index.
pub struct ThetaEvaluator {
    x: DVector<f64>,
    r: f64,
    sample: Points,
    index: Option<NearestSet>,
    net_h: f64,
}

impl ThetaEvaluator {
    pub fn new(cloud: &PointCloud, x: &DVector<f64>, r: f64, patch_h: f64) -> Result<ThetaEvaluator> {
        let sel = restrict_to_ball(cloud, x.as_slice(), r, Ball::Open)?;
        if sel.is_empty() {
            return Err(Error::UndefinedAtScale(format!(
                "no sample points in B_{r}(x) around {:?}",
                x.as_slice()
            )));
        }
        let sample = sel.gather(cloud);
        Self::from_sample(x.clone(), r, sample, patch_h, cloud.resolution())
    }

    pub fn from_sample(
        x: DVector<f64>,
        r: f64,
        sample: Points,
        patch_h: f64,
        h_s: f64,
    ) -> Result<ThetaEvaluator> {
        let index = if sample.len() > 1024 && sample.dim() <= 3 {
            let cell = (4.0 * h_s).max(r / 32.0);
            Some(NearestSet::build(sample.clone(), cell))
        } else {
            None
        };
        Ok(ThetaEvaluator { x, r, sample, index, net_h: patch_h * r })
    }

    pub fn sample(&self) -> &Points {
        &self.sample
    }

    /// θ objective at a fixed plane direction.
    pub fn theta(&self, dir: &Plane) -> Result<f64> {
        Ok(self.theta_bounded(dir, f64::INFINITY))
    }

    /// θ objective with an abort bound: the result is exact whenever it is
    /// below `bound`; otherwise some value ≥ `bound` is returned early. The
    /// optimizer passes its incumbent so that losing candidates are cheap.
    pub fn theta_bounded(&self, dir: &Plane, bound: f64) -> f64 {
        let q = match AffinePlane::new(self.x.clone(), dir.clone()) {
            Ok(q) => q,
            Err(_) => return f64::INFINITY,
        };
        let net = match plane_patch_net(&q, &self.x, self.r, self.net_h) {
            Ok(n) => n,
            Err(_) => return f64::INFINITY,
        };
        let abort = bound * self.r;
        let mut worst = 0.0f64;
        // sample → net
        for p in self.sample.iter() {
            let v = DVector::from_column_slice(p);
            let d = net.nearest_dist(&v);
            if d > worst {
                worst = d;
                if worst > abort {
                    return worst / self.r;
                }
            }
        }
        // net → sample: only record-raising points need exact distances
        match &self.index {
            Some(idx) => {
                for i in 0..net.points().len() {
                    let d = idx.nearest_dist_above(net.points().pt(i), worst);
                    if d > worst {
                        worst = d;
                        if worst > abort {
                            return worst / self.r;
                        }
                    }
                }
            }
            None => {
                for i in 0..net.points().len() {
                    let q = net.points().pt(i);
                    let mut min_d2 = f64::INFINITY;
                    let floor2 = worst * worst;
                    for p in self.sample.iter() {
                        let d2 = crate::pointsets::dist2(q, p);
                        if d2 < min_d2 {
                            min_d2 = d2;
                            if min_d2 <= floor2 {
                                break;
                            }
                        }
                    }
                    let d = min_d2.sqrt();
                    if d > worst {
                        worst = d;
                        if worst > abort {
                            return worst / self.r;
                        }
                    }
                }
            }
        }
        worst / self.r
    }

    /// β objective at a fixed plane direction: sup over the sample of the
    /// distance to the full affine plane x + L, normalized by r.
    pub fn beta(&self, dir: &Plane) -> Result<f64> {
        let frame = dir.frame();
        let mut worst = 0.0f64;
        for p in self.sample.iter() {
            let mut perp2 = 0.0;
            // |π⊥(p−x)|² = |p−x|² − |Fᵀ(p−x)|²
            let mut norm2 = 0.0;
            for (i, &c) in p.iter().enumerate() {
                let d = c - self.x[i];
                norm2 += d * d;
            }
            for j in 0..frame.ncols() {
                let mut dot = 0.0;
                for (i, &c) in p.iter().enumerate() {
                    dot += frame[(i, j)] * (c - self.x[i]);
                }
                perp2 += dot * dot;
            }
            let d2 = (norm2 - perp2).max(0.0);
            if d2 > worst {
                worst = d2;
            }
        }
        Ok(worst.sqrt() / self.r)
    }
}

fn pca_plane(x: &DVector<f64>, sample: &Points, m: usize) -> (Plane, usize) {
    let n = x.len();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for p in sample.iter() {
        for i in 0..n {
            let di = p[i] - x[i];
            for j in i..n {
                cov[(i, j)] += di * (p[j] - x[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let max_ev = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > 1e-20_f64.max(1e-12 * max_ev))
        .count();
    let cols: Vec<DVector<f64>> = order[..m].iter().map(|&i| eig.eigenvectors.column(i).clone_owned()).collect();
    let frame = DMatrix::from_columns(&cols);
    // eigenvector frames are orthonormal already
    (Plane::from_frame(frame).expect("eigenvector frame"), rank)
}

fn perturb_frame(plane: &Plane, scale: f64, rng: &mut ChaCha8Rng) -> Option<Plane> {
    let n = plane.ambient_dim();
    let m = plane.dim();
    let normal = StandardNormal;
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut c = plane.frame().column(j).clone_owned();
        for i in 0..n {
            let g: f64 = normal.sample(rng);
            c[i] += scale * g;
        }
        cols.push(c);
    }
    Plane::new(&cols).ok()
}

/// `eval(plane, bound)` must be exact below `bound` and may return early with
/// any value ≥ `bound` otherwise.
fn refine<F: Fn(&Plane, f64) -> f64>(
    eval: &F,
    start: Plane,
    start_value: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> (Plane, f64) {
    let mut best_plane = start;
    let mut best = start_value;
    let mut scale = 0.4f64;
    for _ in 0..steps {
        if let Some(cand) = perturb_frame(&best_plane, scale, rng) {
            let v = eval(&cand, best);
            if v < best {
                best = v;
                best_plane = cand;
                scale = (scale * 1.4).min(0.8);
            } else {
                scale *= 0.65;
            }
        } else {
            scale *= 0.65;
        }
        if scale < 1e-7 {
            break;
        }
    }
    (best_plane, best)
}

fn optimize<F: Fn(&Plane, f64) -> f64>(
    eval: &F,
    init: Plane,
    init_value: f64,
    n: usize,
    m: usize,
    opts: &FitOptions,
    salt: u64,
) -> (Plane, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9E3779B97F4A7C15));
    let (mut best_plane, mut best) = refine(eval, init, init_value, opts.refine_steps, &mut rng);
    for _ in 1..opts.restarts {
        let start = Plane::random_with(n, m, &mut rng).expect("random start");
        // a restart whose start is already worse than 2× the incumbent is
        // vanishingly unlikely to win; cap its start evaluation accordingly
        let sv = eval(&start, 2.0 * best + 1e-12);
        let (p, v) = refine(eval, start, sv, opts.refine_steps, &mut rng);
        if v < best {
            best = v;
            best_plane = p;
        }
    }
    (best_plane, best)
}

/// Best-plane θ-number at (x, r): the plane through x minimizing the
/// two-sided patch objective, and the attained value.
pub fn best_plane_theta(
    cloud: &PointCloud,
    x: &DVector<f64>,
    r: f64,
    m: usize,
    opts: &FitOptions,
) -> Result<PlaneFit> {
    opts.validate()?;
    let ev = ThetaEvaluator::new(cloud, x, r, opts.patch_h)?;
    best_plane_theta_on(&ev, m, opts, salt_for(x, r))
}

/// θ optimization over a prebuilt evaluator (used by the certificate builder).
pub fn best_plane_theta_on(ev: &ThetaEvaluator, m: usize, opts: &FitOptions, salt: u64) -> Result<PlaneFit> {
    let n = ev.x.len();
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 0 < m < n, got m={m}, n={n}")));
    }
    let (init, rank) = pca_plane(&ev.x, &ev.sample, m);
    let degenerate = rank < m || ev.sample.len() < m + 1;
    if ev.sample.len() == 1 {
        // single-point selection: reported as θ = 0 with any plane through x,
        // flagged degenerate (small scales legitimately run out of samples)
        return Ok(PlaneFit { plane: init, value: 0.0, degenerate: true });
    }
    let pca_value = ev.theta(&init)?;
    let eval = |p: &Plane, bound: f64| ev.theta_bounded(p, bound);
    let (plane, value) = optimize(&eval, init, pca_value, n, m, opts, salt);
    // refinement keeps its initialization as the incumbent
    debug_assert!(value <= pca_value + 1e-15);
    Ok(PlaneFit { plane, value, degenerate })
}

/// Best-plane β-number at (x, r): one-directional objective.
///
/// When `theta_plane` is given, the returned value also never exceeds the β
/// objective evaluated at that plane (any plane upper-bounds the infimum),
/// which enforces β ≤ θ numerically.
pub fn beta(
    cloud: &PointCloud,
    x: &DVector<f64>,
    r: f64,
    m: usize,
    opts: &FitOptions,
    theta_plane: Option<&Plane>,
) -> Result<PlaneFit> {
    opts.validate()?;
    let ev = ThetaEvaluator::new(cloud, x, r, opts.patch_h)?;
    let n = x.len();
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 0 < m < n, got m={m}, n={n}")));
    }
    let (init, rank) = pca_plane(&ev.x, &ev.sample, m);
    let degenerate = rank < m || ev.sample.len() < m + 1;
    let eval = |p: &Plane, _bound: f64| ev.beta(p).unwrap_or(f64::INFINITY);
    let init_value = eval(&init, f64::INFINITY);
    let (mut plane, mut value) = optimize(&eval, init, init_value, n, m, opts, salt_for(x, r) ^ 0xBE7A);
    if let Some(tp) = theta_plane {
        let vt = ev.beta(tp)?;
        if vt < value {
            value = vt;
            plane = tp.clone();
        }
    }
    Ok(PlaneFit { plane, value, degenerate })
}

fn salt_for(x: &DVector<f64>, r: f64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |b: u64| {
        h ^= b;
        h = h.wrapping_mul(0x100000001b3);
    };
    for &c in x.iter() {
        mix(c.to_bits());
    }
    mix(r.to_bits());
    h
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// Fit results for one region point at one radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointFit {
    /// None when the ball at this scale contains no sample.
    pub theta: Option<f64>,
    pub beta: Option<f64>,
    pub plane: Option<Plane>,
    pub degenerate: bool,
}

/// One radius row of a [`ScaleProfile`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub r: f64,
    /// sup over the region of θ(x, r); None when undefined at every point.
    pub theta: Option<f64>,
    /// sup over the region of β(x, r).
    pub beta: Option<f64>,
    /// Best plane at the θ-sup-achieving region point.
    pub plane: Option<Plane>,
    pub argmax: Option<usize>,
    pub reliable: bool,
    /// Additive uncertainty (h_S + patch_h·r)/r carried by every θ value.
    pub slack: f64,
    /// Region points whose ball was empty at this scale.
    pub undefined_points: usize,
    pub per_point: Vec<PointFit>,
}

/// θ_K(r) profile: per-radius sup over a finite region net of θ and β values
/// with the per-(x,r) best planes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleProfile {
    pub region: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub rows: Vec<ProfileRow>,
    pub sample_resolution: f64,
    pub patch_h: f64,
    pub min_reliable_scale: Option<f64>,
    pub seed: u64,
}

impl ScaleProfile {
    /// Reliable rows with a defined θ value, as (index, r, θ, slack).
    pub fn reliable_theta(&self) -> Vec<(usize, f64, f64, f64)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row.theta.filter(|_| row.reliable).map(|t| (i, row.r, t, row.slack)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,theta,beta,reliable,frame\n");
        for row in &self.rows {
            let frame = row
                .plane
                .as_ref()
                .map(|p| {
                    let f = p.frame();
                    let vals: Vec<String> = f.iter().map(|v| format!("{v:e}")).collect();
                    vals.join(";")
                })
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{:e},{},{},{},{}",
                row.r,
                row.theta.map(|v| format!("{v:e}")).unwrap_or_default(),
                row.beta.map(|v| format!("{v:e}")).unwrap_or_default(),
                row.reliable,
                frame
            );
        }
        out
    }
}

/// Reliability floor multiplier: scales below `20 × max(h_S, patch_h·r)` are
/// flagged unreliable.
pub const RELIABILITY_FACTOR: f64 = 20.0;

/// Compute the multiscale profile: per radius, θ and β sups over the region.
///
/// Undefined scales at individual points propagate as gaps (`None`), never as
/// zeros. Tasks are independent per (x, r) and run in parallel with per-task
/// seeds, so results do not depend on scheduling.
pub fn theta_profile(
    cloud: &PointCloud,
    region: &[DVector<f64>],
    radii: &[f64],
    m: usize,
    opts: &FitOptions,
) -> Result<ScaleProfile> {
    opts.validate()?;
    if region.is_empty() {
        return Err(Error::InvalidParameter("empty region net".into()));
    }
    for w in radii.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidParameter("radii must be strictly decreasing".into()));
        }
    }
    if radii.is_empty() {
        return Err(Error::InvalidParameter("no radii given".into()));
    }

    let tasks: Vec<(usize, usize)> = (0..radii.len())
        .flat_map(|j| (0..region.len()).map(move |i| (j, i)))
        .collect();
    let fits: Vec<PointFit> = tasks
        .par_iter()
        .map(|&(j, i)| {
            let x = &region[i];
            let r = radii[j];
            match best_plane_theta(cloud, x, r, m, opts) {
                Ok(fit) => {
                    let b = beta(cloud, x, r, m, opts, Some(&fit.plane)).map(|bf| bf.value).ok();
                    PointFit {
                        theta: Some(fit.value),
                        beta: b,
                        plane: Some(fit.plane),
                        degenerate: fit.degenerate,
                    }
                }
                Err(Error::UndefinedAtScale(_)) => {
                    PointFit { theta: None, beta: None, plane: None, degenerate: false }
                }
                Err(_) => PointFit { theta: None, beta: None, plane: None, degenerate: false },
            }
        })
        .collect();

    let h_s = cloud.resolution();
    let mut rows = Vec::with_capacity(radii.len());
    for (j, &r) in radii.iter().enumerate() {
        let per_point: Vec<PointFit> = (0..region.len()).map(|i| fits[j * region.len() + i].clone()).collect();
        let mut theta: Option<f64> = None;
        let mut argmax = None;
        for (i, f) in per_point.iter().enumerate() {
            if let Some(t) = f.theta {
                if theta.map_or(true, |cur| t > cur) {
                    theta = Some(t);
                    argmax = Some(i);
                }
            }
        }
        let beta_sup = per_point.iter().filter_map(|f| f.beta).fold(None, |acc: Option<f64>, b| {
            Some(acc.map_or(b, |a| a.max(b)))
        });
        let undefined_points = per_point.iter().filter(|f| f.theta.is_none()).count();
        let slack = (h_s + opts.patch_h * r) / r;
        let mut reliable = r >= RELIABILITY_FACTOR * h_s.max(opts.patch_h * r) && theta.is_some();
        if let Some(floor) = cloud.min_reliable_scale() {
            reliable &= r >= floor;
        }
        rows.push(ProfileRow {
            r,
            theta,
            beta: beta_sup,
            plane: argmax.and_then(|i| per_point[i].plane.clone()),
            argmax,
            reliable,
            slack,
            undefined_points,
            per_point,
        });
    }
    Ok(ScaleProfile {
        region: region.iter().map(|x| x.as_slice().to_vec()).collect(),
        radii: radii.to_vec(),
        rows,
        sample_resolution: h_s,
        patch_h: opts.patch_h,
        min_reliable_scale: cloud.min_reliable_scale(),
        seed: opts.seed,
    })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlatnessVerdict {
    Vanishing,
    BoundedNotVanishing,
    NotFlat,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub verdict: FlatnessVerdict,
    /// sup of reliable θ values.
    pub delta_estimate: f64,
    pub notes: String,
}

/// θ values at or below this are considered vanished at the deepest scales.
pub const VANISHING_TAIL: f64 = 0.05;

/// Classify a profile as flat-with-vanishing-constant, flat-at-a-positive-
/// constant, or not flat.
///
/// Values at the sampling noise floor (θ ≤ 1.5 × slack) cannot certify a
/// positive constant, so an all-floor profile counts as vanishing even when
/// it does not visibly decrease — a perfectly flat set measures at its slack.
pub fn classify_flatness(profile: &ScaleProfile) -> FlatnessReport {
    let rel = profile.reliable_theta();
    if rel.len() < 4 {
        return FlatnessReport {
            verdict: FlatnessVerdict::Inconclusive,
            delta_estimate: rel.iter().map(|&(_, _, t, _)| t).fold(0.0, f64::max),
            notes: format!("only {} reliable scales (need ≥ 4)", rel.len()),
        };
    }
    let thetas: Vec<f64> = rel.iter().map(|&(_, _, t, _)| t).collect();
    let max = thetas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = thetas.iter().cloned().fold(f64::INFINITY, f64::min);
    let at_floor = rel.iter().all(|&(_, _, t, s)| t <= 1.5 * s);
    let last_two_small = thetas[thetas.len() - 2] < VANISHING_TAIL && thetas[thetas.len() - 1] < VANISHING_TAIL;
    let mean = thetas.iter().sum::<f64>() / thetas.len() as f64;
    let mean_slack = rel.iter().map(|&(_, _, _, s)| s).sum::<f64>() / rel.len() as f64;

    let verdict;
    let notes;
    if last_two_small && (min < 0.5 * max || at_floor) {
        verdict = FlatnessVerdict::Vanishing;
        notes = if at_floor {
            "θ at sampling noise floor across all reliable scales".to_string()
        } else {
            format!("θ decreases from {max:.3e} to {min:.3e}; deepest scales below {VANISHING_TAIL}")
        };
    } else if max <= 1.2 * mean && min >= 0.8 * mean && mean > 2.0 * mean_slack {
        verdict = FlatnessVerdict::BoundedNotVanishing;
        notes = format!("θ within ±20% of {mean:.3e} across reliable scales");
    } else {
        verdict = FlatnessVerdict::NotFlat;
        notes = format!("θ range [{min:.3e}, {max:.3e}] fits neither vanishing nor constant");
    }
    FlatnessReport { verdict, delta_estimate: max, notes }
}
