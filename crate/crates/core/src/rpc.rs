//! Radius-ladder plane-convergence certificates.
//!
//! A certificate records, for a base point x, a ladder of radii r_i with
//! bounded consecutive ratio, a net of points y ∈ Σ ∩ B_{R_x}(x), the best
//! approximating plane P(y, r_i) and achieved distance ratio per (y, i), the
//! per-scale sups δ_i and ε_i = sup_y ∢(P(y,r_i), P_y), and the limit plane
//! P_y per net point. Checking a certificate asks that the ladder constraint
//! holds, that the δ and ε tails decrease (with an absolute floor — finite
//! samples bottom out at their resolution), and that the recorded sups are
//! consistent with the stored planes.
//!
//! The module also verifies the quantitative estimates the certificate feeds:
//! the angle-from-flatness bound with its empirical constant calibration, the
//! piecewise-constant distance bound w_x(r) = ε_i + C_x·δ_i, and the
//! fixed-plane approximation quality δ̃_k = sup_{i≥k}(ε_i + 2·C_x·δ_i).

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatness::{best_plane_theta, FitOptions, ThetaEvaluator, RELIABILITY_FACTOR};
use crate::grassmann::{angle, AffinePlane, Plane};
use crate::multiscale;
use crate::pointsets::{dist, greedy_net, restrict_to_ball, Ball, PointCloud, PointSet};

/// Default empirical constant for the basis-angle bound, frozen from the
/// calibration suite (`calibrate_c1`, 10⁴ trials) as 1.1 × the observed
/// maximum ratio, floored at 1 so the shipped constants satisfy C₁ ≥ 1.
pub const DEFAULT_C1: f64 = 1.0;

/// The constant pack: C₁ (configurable), C₂ = (22/3)·C₁, and
/// δ₀ = (48·(3C₁+2))⁻¹.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Constants {
    c1: f64,
}

impl Constants {
    /// The shipped constants use the calibrated default C₁ ≥ 1. Explicit
    /// overrides may go below 1 (e.g. to demonstrate angle-lemma violations).
    pub fn new(c1: f64) -> Result<Constants> {
        if !(c1 > 0.0) {
            return Err(Error::InvalidParameter("C1 must be positive".into()));
        }
        Ok(Constants { c1 })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        22.0 / 3.0 * self.c1
    }

    pub fn delta0(&self) -> f64 {
        1.0 / (48.0 * (3.0 * self.c1 + 2.0))
    }
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c1: DEFAULT_C1 }
    }
}

/// Plane-convergence certificate for one base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpcCertificate {
    pub base: Vec<f64>,
    #[serde(rename = "R_x")]
    pub r_top: f64,
    #[serde(rename = "C_x")]
    pub c_x: f64,
    pub radii: Vec<f64>,
    pub net: Vec<Vec<f64>>,
    /// planes[y][i] = P(y, r_i).
    pub planes: Vec<Vec<Plane>>,
    pub delta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub limit_planes: Vec<Plane>,
    /// Achieved distance ratio per (y, i); ratios[y][i] ≤ delta[i].
    pub ratios: Vec<Vec<f64>>,
    pub dim: usize,
    pub plane_dim: usize,
    pub sample_resolution: f64,
    pub patch_h: f64,
    pub truncated_scales: usize,
    pub seed: u64,
}

impl RpcCertificate {
    pub fn depth(&self) -> usize {
        self.radii.len()
    }

    /// δ̃_k = sup_{i≥k} (ε_i + 2·C_x·δ_i); non-increasing in k.
    pub fn delta_tilde(&self) -> Vec<f64> {
        let n = self.depth();
        let mut out = vec![0.0; n];
        let mut sup = 0.0f64;
        for k in (0..n).rev() {
            sup = sup.max(self.epsilon[k] + 2.0 * self.c_x * self.delta[k]);
            out[k] = sup;
        }
        out
    }

    /// w_x(|z−y|) = ε_i + C_x·δ_i on the annulus (r_{i+1}, r_i]; None below
    /// the deepest scale or above the first.
    pub fn w_at(&self, sep: f64) -> Option<f64> {
        let n = self.depth();
        for i in 0..n - 1 {
            if sep > self.radii[i + 1] && sep <= self.radii[i] {
                return Some(self.epsilon[i] + self.c_x * self.delta[i]);
            }
        }
        None
    }

    /// Per-scale additive θ uncertainty (h_S + patch_h·r)/r.
    pub fn slack(&self, i: usize) -> f64 {
        (self.sample_resolution + self.patch_h * self.radii[i]) / self.radii[i]
    }

    pub fn max_slack(&self) -> f64 {
        (0..self.depth()).map(|i| self.slack(i)).fold(0.0, f64::max)
    }
}

/// Build a certificate: ladder radii from the bracket-midpoint construction,
/// greedy net over Σ ∩ B_{R_x}(x), per-(y, i) best planes, δ/ε sups, and the
/// deepest reliable plane per point as the limit-plane proxy.
///
/// Scales below the resolution floor are truncated with a warning, never
/// fabricated.
#[allow(clippy::too_many_arguments)]
pub fn build_certificate(
    cloud: &PointCloud,
    x: &DVector<f64>,
    m: usize,
    r_top: f64,
    c_x: f64,
    depth: usize,
    net_spacing: Option<f64>,
    opts: &FitOptions,
) -> Result<(RpcCertificate, Vec<String>)> {
    opts.validate()?;
    if depth < 3 {
        return Err(Error::Precondition("certificate needs depth ≥ 3".into()));
    }
    if c_x <= 1.0 {
        return Err(Error::InvalidParameter("C_x must be > 1".into()));
    }
    let mut warnings = Vec::new();
    let ladder = multiscale::ladder(r_top, c_x, depth)?;
    let mut radii = ladder.radii;
    let floor = (RELIABILITY_FACTOR * cloud.resolution())
        .max(cloud.min_reliable_scale().unwrap_or(0.0));
    let keep = radii.iter().take_while(|&&r| r >= floor).count();
    let truncated_scales = radii.len() - keep;
    if truncated_scales > 0 {
        warnings.push(format!(
            "truncated {truncated_scales} scales below the resolution floor {floor:.3e}"
        ));
        radii.truncate(keep);
    }
    if radii.len() < 3 {
        return Err(Error::Precondition(format!(
            "only {} usable scales above the resolution floor (need ≥ 3)",
            radii.len()
        )));
    }

    let sel = restrict_to_ball(cloud, x.as_slice(), r_top, Ball::Open)?;
    if sel.is_empty() {
        return Err(Error::Precondition("no sample points in B_{R_x}(x)".into()));
    }
    let ball_points = sel.gather(cloud);
    let spacing = net_spacing.unwrap_or(radii.last().unwrap() / 4.0);
    let net_idx = greedy_net(&ball_points, x.as_slice(), spacing);
    let net: Vec<Vec<f64>> = net_idx.iter().map(|&i| ball_points.pt(i).to_vec()).collect();

    // per-(y, i) plane fits, parallel with order-stable collection
    let tasks: Vec<(usize, usize)> = (0..net.len())
        .flat_map(|yi| (0..radii.len()).map(move |i| (yi, i)))
        .collect();
    let fits: Vec<Result<(Plane, f64, bool)>> = tasks
        .par_iter()
        .map(|&(yi, i)| {
            let y = DVector::from_column_slice(&net[yi]);
            let fit = best_plane_theta(cloud, &y, radii[i], m, opts)?;
            Ok((fit.plane, fit.value, fit.degenerate))
        })
        .collect();

    let n_scales = radii.len();
    let mut planes: Vec<Vec<Plane>> = Vec::with_capacity(net.len());
    let mut ratios: Vec<Vec<f64>> = Vec::with_capacity(net.len());
    let mut degenerate_count = 0usize;
    for yi in 0..net.len() {
        let mut prow = Vec::with_capacity(n_scales);
        let mut rrow = Vec::with_capacity(n_scales);
        for i in 0..n_scales {
            match &fits[yi * n_scales + i] {
                Ok((p, v, deg)) => {
                    if *deg {
                        degenerate_count += 1;
                    }
                    prow.push(p.clone());
                    rrow.push(v.min(1.0));
                }
                Err(e) => {
                    return Err(Error::Precondition(format!(
                        "plane fit failed at net point {yi}, scale {i}: {e}"
                    )))
                }
            }
        }
        planes.push(prow);
        ratios.push(rrow);
    }
    if degenerate_count > 0 {
        warnings.push(format!("{degenerate_count} degenerate (y, scale) fits"));
    }

    let limit_planes: Vec<Plane> = planes.iter().map(|row| row[n_scales - 1].clone()).collect();
    let mut delta = vec![0.0f64; n_scales];
    let mut epsilon = vec![0.0f64; n_scales];
    for yi in 0..net.len() {
        for i in 0..n_scales {
            delta[i] = delta[i].max(ratios[yi][i]);
            let a = angle(&planes[yi][i], &limit_planes[yi])?;
            epsilon[i] = epsilon[i].max(a);
        }
    }
    for v in delta.iter_mut().chain(epsilon.iter_mut()) {
        *v = v.clamp(1e-15, 1.0);
    }

    Ok((
        RpcCertificate {
            base: x.as_slice().to_vec(),
            r_top,
            c_x,
            radii,
            net,
            planes,
            delta,
            epsilon,
            limit_planes,
            ratios,
            dim: cloud.dim(),
            plane_dim: m,
            sample_resolution: cloud.resolution(),
            patch_h: opts.patch_h,
            truncated_scales,
            seed: opts.seed,
        },
        warnings,
    ))
}

// ---------------------------------------------------------------------------
// Checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    pub clauses: Vec<ClauseResult>,
    pub tol: f64,
}

impl CheckReport {
    pub fn failing(&self) -> Vec<String> {
        self.clauses.iter().filter(|c| !c.pass).map(|c| c.clause.clone()).collect()
    }
}

/// Tail-decrease test: the max over the last third must drop below half the
/// max over the first third, or below the absolute floor tol/4 (finite-sample
/// sequences bottom out at their resolution instead of reaching zero), and
/// the last value must be below `tol`.
fn tail_decreases(seq: &[f64], tol: f64) -> (bool, String) {
    let n = seq.len();
    let third = n.div_ceil(3);
    let first = seq[..third].iter().cloned().fold(0.0f64, f64::max);
    let last = seq[n - third..].iter().cloned().fold(0.0f64, f64::max);
    let floor = tol / 4.0;
    let decayed = last < 0.5 * first || last < floor;
    let small = *seq.last().unwrap() < tol;
    let pass = decayed && small;
    (
        pass,
        format!(
            "first-third max {first:.3e}, last-third max {last:.3e}, last {:.3e} (tol {tol}, floor {floor:.2e})",
            seq.last().unwrap()
        ),
    )
}

/// Default tolerance for "converging to zero" on finite sequences.
pub const CHECK_TOL: f64 = 0.05;

/// Check a certificate: (a) ladder ratio constraint, (b) δ and ε tails
/// decrease, (c) the stored per-(y,i) ratios and angles are consistent with
/// the recorded sups.
pub fn check_certificate(cert: &RpcCertificate, tol: f64) -> Result<CheckReport> {
    let mut clauses = Vec::new();

    let mut ladder_ok = true;
    let mut ladder_detail = String::from("r_{i+1} < r_i ≤ C_x·r_{i+1} for all i");
    for w in cert.radii.windows(2) {
        if !(w[1] < w[0] && w[0] <= cert.c_x * w[1] * (1.0 + 1e-12)) {
            ladder_ok = false;
            ladder_detail = format!("violated at {} → {}", w[0], w[1]);
            break;
        }
    }
    clauses.push(ClauseResult { clause: "ladder".into(), pass: ladder_ok, detail: ladder_detail });

    let (dpass, ddetail) = tail_decreases(&cert.delta, tol);
    clauses.push(ClauseResult { clause: "delta".into(), pass: dpass, detail: ddetail });
    let (epass, edetail) = tail_decreases(&cert.epsilon, tol);
    clauses.push(ClauseResult { clause: "epsilon".into(), pass: epass, detail: edetail });

    let mut consistent = true;
    let mut cdetail = String::from("per-(y,i) ratios ≤ δ_i and plane angles ≤ ε_i");
    'outer: for yi in 0..cert.net.len() {
        for i in 0..cert.depth() {
            if cert.ratios[yi][i] > cert.delta[i] + 1e-9 {
                consistent = false;
                cdetail = format!("ratio at (y={yi}, i={i}) exceeds δ_i");
                break 'outer;
            }
            let a = angle(&cert.planes[yi][i], &cert.limit_planes[yi])?;
            if a > cert.epsilon[i] + 1e-9 {
                consistent = false;
                cdetail = format!("angle at (y={yi}, i={i}) exceeds ε_i");
                break 'outer;
            }
        }
    }
    clauses.push(ClauseResult { clause: "consistency".into(), pass: consistent, detail: cdetail });

    let pass = clauses.iter().all(|c| c.pass);
    Ok(CheckReport { pass, clauses, tol })
}

// ---------------------------------------------------------------------------
// Limit-plane diagnosis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitDiagnosis {
    pub limit: Plane,
    /// cauchy_defect[k] = max_{i,j ≥ k} ∢(P_i, P_j).
    pub cauchy_defect: Vec<f64>,
    pub converging: bool,
}

/// Cauchy-style convergence diagnosis for a per-scale plane sequence.
pub fn limit_plane_diagnosis(planes: &[Plane], tol: f64) -> Result<LimitDiagnosis> {
    if planes.len() < 4 {
        return Err(Error::Precondition("limit diagnosis needs ≥ 4 scales".into()));
    }
    let n = planes.len();
    let mut pairwise = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = angle(&planes[i], &planes[j])?;
            pairwise[i][j] = a;
            pairwise[j][i] = a;
        }
    }
    let mut cauchy_defect = vec![0.0f64; n];
    for k in 0..n {
        let mut worst = 0.0f64;
        for i in k..n {
            for j in i + 1..n {
                worst = worst.max(pairwise[i][j]);
            }
        }
        cauchy_defect[k] = worst;
    }
    let tail = cauchy_defect[n - n.div_ceil(3)];
    Ok(LimitDiagnosis { limit: planes[n - 1].clone(), converging: tail < tol, cauchy_defect })
}

// ---------------------------------------------------------------------------
// Angle-from-flatness lemma verification and C1 calibration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleLemmaReport {
    pub trials: usize,
    pub admissible: usize,
    pub skipped: usize,
    pub violations: usize,
    /// max over admissible trials of ∢(P₁,P₂)/bound-without-C₁ — the
    /// empirical lower bound for C₁.
    pub max_ratio: f64,
    pub c1_used: f64,
    pub seed: u64,
    pub ambient_dim: usize,
    pub plane_dim: usize,
}

/// One random two-patch configuration; returns (angle, bound-without-C1) if
/// the lemma hypothesis holds with the measured flatness ratios.
fn angle_lemma_trial(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Option<(f64, f64)>> {
    let r1: f64 = rng.gen_range(0.5..1.0);
    let r2: f64 = r1 * rng.gen_range(1.0..2.5);
    let p1 = Plane::random_with(n, m, rng)?;
    // a nearby second plane keeps the hypothesis satisfiable; cubic bias
    // toward small tilts so a useful fraction of trials is admissible
    let tilt = {
        let u: f64 = rng.gen_range(0.0..1.0);
        0.3 * u * u * u
    };
    let p2 = {
        let mut cols = Vec::with_capacity(m);
        for j in 0..m {
            let mut c = p1.frame().column(j).clone_owned();
            for i in 0..n {
                let g: f64 = rng.gen_range(-1.0..1.0);
                c[i] += tilt * g;
            }
            cols.push(c);
        }
        match Plane::new(&cols) {
            Ok(p) => p,
            Err(_) => return Ok(None),
        }
    };
    let x1: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-0.05..0.05));
    let x2 = {
        // mostly in-plane center offset: a large perpendicular offset makes
        // the union far from both patches and the hypothesis unsatisfiable
        let mut inplane: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        inplane = p1.project(&inplane)?;
        let norm = inplane.norm().max(1e-12);
        inplane *= rng.gen_range(0.0..0.45 * r1) / norm;
        let mut perp: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        perp = p1.project_perp(&perp)?;
        let pnorm = perp.norm().max(1e-12);
        perp *= rng.gen_range(0.0..0.03 * r1) / pnorm;
        let x2 = &x1 + inplane + perp;
        if (&x2 - &x1).norm() >= 0.5 * r1 {
            return Ok(None);
        }
        x2
    };

    // Σ = union of two perturbed plane patches
    let h = r1 / 60.0;
    let u: f64 = rng.gen_range(0.0..1.0);
    let perturb1: f64 = 0.03 * r1 * u * u;
    let u: f64 = rng.gen_range(0.0..1.0);
    let perturb2: f64 = 0.03 * r2 * u * u;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    {
        let mut sample_patch = |base: &DVector<f64>, pl: &Plane, r: f64, eps: f64, rng: &mut ChaCha8Rng| {
            let q = AffinePlane::new(base.clone(), pl.clone()).unwrap();
            let net = crate::pointsets::plane_patch_net(&q, base, r, h).unwrap();
            for i in 0..net.points().len() {
                let mut p = net.points().pt(i).to_vec();
                if eps > 0.0 {
                    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    let len = rng.gen_range(0.0..eps);
                    for (pc, dc) in p.iter_mut().zip(&d) {
                        *pc += dc * len / norm;
                    }
                }
                rows.push(p);
            }
        };
        sample_patch(&x1, &p1, r1, perturb1, rng);
        sample_patch(&x2, &p2, r2, perturb2, rng);
    }
    let sigma = PointCloud::new(n, rows, h, "angle-lemma trial")?;

    // measured flatness ratios of the union against each patch
    let mut deltas = [0.0f64; 2];
    for (j, (base, pl, r)) in [(&x1, &p1, r1), (&x2, &p2, r2)].iter().enumerate() {
        let ev = ThetaEvaluator::new(&sigma, base, *r, (h / r).min(0.1))?;
        deltas[j] = ev.theta(pl)?;
    }
    let (d1, d2) = (deltas[0], deltas[1]);
    if !(d1 > 0.0 && d1 < 0.5 && d2 > 0.0 && d2 < 0.5) {
        return Ok(None);
    }
    let core = 2.0 / (1.0 - 2.0 * d1) * (d1 + 2.0 * (r2 / r1) * d2);
    if core >= std::f64::consts::FRAC_1_SQRT_2 {
        return Ok(None);
    }
    let a = angle(&p1, &p2)?;
    Ok(Some((a, core)))
}

/// Run random admissible configurations and check the angle bound
/// ∢(P₁,P₂) ≤ C₁·(2/(1−2δ₁))(δ₁ + 2(r₂/r₁)δ₂).
pub fn verify_angle_lemma(
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
    constants: &Constants,
) -> Result<AngleLemmaReport> {
    let results: Vec<Option<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((t as u64).wrapping_mul(0x9E37)));
            angle_lemma_trial(n, m, &mut rng).unwrap_or(None)
        })
        .collect();
    let mut admissible = 0;
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for r in results.iter().flatten() {
        let (a, core) = *r;
        admissible += 1;
        max_ratio = max_ratio.max(a / core);
        if a > constants.c1() * core {
            violations += 1;
        }
    }
    Ok(AngleLemmaReport {
        trials,
        admissible,
        skipped: trials - admissible,
        violations,
        max_ratio,
        c1_used: constants.c1(),
        seed,
        ambient_dim: n,
        plane_dim: m,
    })
}

/// Empirical maximum of ∢/bound over the trial suite; the shipped constant is
/// 1.1 × this, floored at 1.
pub fn calibrate_c1(n: usize, m: usize, trials: usize, seed: u64) -> Result<f64> {
    let dummy = Constants::new(1.0)?;
    Ok(verify_angle_lemma(n, m, trials, seed, &dummy)?.max_ratio)
}

// ---------------------------------------------------------------------------
// w-bound and fixed-plane verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WBoundReport {
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    pub max_margin: f64,
    pub slack: f64,
}

/// Sample pairs (y ∈ net, z ∈ Σ ∩ B_{r_1}(y)) and check
/// dist(z, y+P_y) ≤ (ε_i + C_x·δ_i)·|z−y| + slack on the annulus containing
/// |z−y|. Pairs outside the ladder range are skipped and counted.
pub fn verify_w_bound(
    cert: &RpcCertificate,
    cloud: &PointCloud,
    pairs: usize,
    seed: u64,
) -> Result<WBoundReport> {
    let slack = 2.0 * cert.sample_resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r1 = cert.radii[0];
    let mut checked = 0;
    let mut skipped = 0;
    let mut violations = 0;
    let mut max_margin = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let yi = rng.gen_range(0..cert.net.len());
        let y = DVector::from_column_slice(&cert.net[yi]);
        let sel = restrict_to_ball(cloud, y.as_slice(), r1, Ball::Open)?;
        if sel.is_empty() {
            skipped += 1;
            continue;
        }
        let zi = sel.indices[rng.gen_range(0..sel.indices.len())];
        let z = cloud.vector(zi);
        let sep = dist(z.as_slice(), y.as_slice());
        let Some(w) = cert.w_at(sep) else {
            skipped += 1;
            continue;
        };
        let q = AffinePlane::new(y.clone(), cert.limit_planes[yi].clone())?;
        let d = q.distance(&z)?;
        let bound = w * sep + slack;
        let margin = d - bound;
        max_margin = max_margin.max(margin);
        checked += 1;
        if margin > 0.0 {
            violations += 1;
        }
    }
    Ok(WBoundReport { checked, skipped, violations, max_margin, slack })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPlaneReport {
    pub delta_tilde: Vec<f64>,
    /// max over tested (y, k) of θ against the fixed plane minus the bound.
    pub theta_max_margin: f64,
    pub theta_checked: usize,
    pub theta_violations: usize,
    /// Pairwise plane-coherence check ∢(P_y, P_z) ≤ C₂·δ̃_k; None when
    /// δ̃ ≥ 1/11 at every depth (hypothesis unmet).
    pub coherence: Option<CoherenceReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub k: usize,
    pub pairs: usize,
    pub violations: usize,
    pub max_angle: f64,
    pub bound: f64,
}

/// Fixed-plane quality: θ of the sample against y+P_y stays below
/// δ̃_k (+ 3× sampling slack) at every r ≤ r_k, and nearby limit planes agree
/// within C₂·δ̃_k when δ̃_k < 1/11.
pub fn verify_fixed_plane(
    cert: &RpcCertificate,
    cloud: &PointCloud,
    constants: &Constants,
) -> Result<FixedPlaneReport> {
    let delta_tilde = cert.delta_tilde();
    let depth = cert.depth();

    let tasks: Vec<(usize, usize)> = (0..cert.net.len())
        .flat_map(|yi| (0..depth).map(move |k| (yi, k)))
        .collect();
    let margins: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(yi, k)| {
            let y = DVector::from_column_slice(&cert.net[yi]);
            let r = cert.radii[k];
            let ev = ThetaEvaluator::new(cloud, &y, r, cert.patch_h)?;
            let th = ev.theta(&cert.limit_planes[yi])?;
            Ok(th - (delta_tilde[k] + 3.0 * cert.slack(k)))
        })
        .collect();
    let mut theta_max_margin = f64::NEG_INFINITY;
    let mut theta_checked = 0;
    let mut theta_violations = 0;
    for r in margins {
        let margin = r?;
        theta_checked += 1;
        theta_max_margin = theta_max_margin.max(margin);
        if margin > 0.0 {
            theta_violations += 1;
        }
    }

    // coherence at the shallowest k with δ̃_k < 1/11
    let coherence = match (0..depth).find(|&k| delta_tilde[k] < 1.0 / 11.0) {
        None => None,
        Some(k) => {
            let bound = constants.c2() * delta_tilde[k] + 4.0 * cert.max_slack();
            let mut pairs = 0;
            let mut violations = 0;
            let mut max_angle = 0.0f64;
            for yi in 0..cert.net.len() {
                for zi in yi + 1..cert.net.len() {
                    let sep = dist(&cert.net[yi], &cert.net[zi]);
                    if sep < cert.radii[k] / 2.0 {
                        let a = angle(&cert.limit_planes[yi], &cert.limit_planes[zi])?;
                        pairs += 1;
                        max_angle = max_angle.max(a);
                        if a > bound {
                            violations += 1;
                        }
                    }
                }
            }
            Some(CoherenceReport { k, pairs, violations, max_angle, bound })
        }
    };

    Ok(FixedPlaneReport {
        delta_tilde,
        theta_max_margin,
        theta_checked,
        theta_violations,
        coherence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointsets::{generate, GeneratorKind};

    fn v2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x, y])
    }

    fn line_cert() -> (PointCloud, RpcCertificate) {
        let cloud = generate(&GeneratorKind::Line { domain: (-1.0, 1.0) }, 2e-4).unwrap();
        let opts = FitOptions { seed: 7, ..Default::default() };
        let (cert, _) =
            build_certificate(&cloud, &v2(0.0, 0.0), 1, 0.5, 2.0, 7, Some(0.06), &opts).unwrap();
        (cloud, cert)
    }

    fn circle_cert() -> (PointCloud, RpcCertificate) {
        let cloud = generate(&GeneratorKind::Circle { radius: 1.0, arc: None }, 1.5e-4).unwrap();
        let opts = FitOptions { seed: 7, patch_h: 0.004, ..Default::default() };
        let (cert, _) =
            build_certificate(&cloud, &v2(1.0, 0.0), 1, 0.3, 2.0, 8, Some(0.04), &opts).unwrap();
        (cloud, cert)
    }

    #[test]
    fn constants_derivations() {
        let c = Constants::new(5.0).unwrap();
        assert!((c.c2() - 110.0 / 3.0).abs() < 1e-12);
        assert!((c.delta0() - 1.0 / 816.0).abs() < 1e-15);
        assert!(Constants::new(0.0).is_err());
    }

    #[test]
    fn line_certificate_passes() {
        let (_cloud, cert) = line_cert();
        // all planes equal the line
        let axis = Plane::new(&[v2(1.0, 0.0)]).unwrap();
        for row in &cert.planes {
            for p in row {
                assert!(angle(p, &axis).unwrap() < 1e-3);
            }
        }
        // δ within resolution slack, ε tiny
        for i in 0..cert.depth() {
            assert!(cert.delta[i] <= cert.slack(i) + 1e-9, "δ_{i} = {}", cert.delta[i]);
        }
        assert!(cert.epsilon.iter().all(|&e| e < 2e-3));
        let report = check_certificate(&cert, CHECK_TOL).unwrap();
        assert!(report.pass, "{:?}", report.clauses);
    }

    #[test]
    fn circle_certificate_passes_with_tangent_planes() {
        let (_, cert) = circle_cert();
        // δ decreasing roughly geometrically
        let first = cert.delta.first().unwrap();
        let last = cert.delta.last().unwrap();
        assert!(last < &(0.5 * first), "δ failed to decay: {:?}", cert.delta);
        // limit planes near the true tangents
        for (yi, y) in cert.net.iter().enumerate() {
            let tangent = Plane::new(&[v2(-y[1], y[0])]).unwrap();
            let a = angle(&cert.limit_planes[yi], &tangent).unwrap();
            assert!(a < 1e-2, "P_y off the tangent by {a}");
        }
        let report = check_certificate(&cert, CHECK_TOL).unwrap();
        assert!(report.pass, "{:?}", report.clauses);
    }

    #[test]
    fn cone_certificate_fails_delta_only() {
        let cloud = generate(&GeneratorKind::ConeGraph { delta: 0.2, domain: (-1.0, 1.0) }, 2e-4).unwrap();
        let opts = FitOptions { seed: 7, ..Default::default() };
        let (cert, _) =
            build_certificate(&cloud, &v2(0.0, 0.0), 1, 0.5, 2.0, 7, Some(0.06), &opts).unwrap();
        // scale-invariance keeps δ at the apex value at every scale
        let spread = cert.delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - cert.delta.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.06, "cone δ nearly constant, spread {spread}: {:?}", cert.delta);
        let report = check_certificate(&cert, CHECK_TOL).unwrap();
        assert!(!report.pass);
        let failing = report.failing();
        assert!(failing.contains(&"delta".to_string()), "{failing:?}");
        assert!(
            !failing.contains(&"epsilon".to_string()),
            "cone planes converge per point: {failing:?}"
        );
    }

    #[test]
    fn certificate_json_round_trip_reproduces_verdict() {
        let (_, cert) = circle_cert();
        let text = serde_json::to_string(&cert).unwrap();
        let back: RpcCertificate = serde_json::from_str(&text).unwrap();
        let a = check_certificate(&cert, CHECK_TOL).unwrap();
        let b = check_certificate(&back, CHECK_TOL).unwrap();
        assert_eq!(a.pass, b.pass);
        assert_eq!(a.failing(), b.failing());
        // byte-stable re-serialization
        assert_eq!(text, serde_json::to_string(&back).unwrap());
    }

    #[test]
    fn delta_tilde_monotone() {
        let (_, cert) = circle_cert();
        let dt = cert.delta_tilde();
        for w in dt.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "δ̃ must be non-increasing");
        }
    }

    #[test]
    fn limit_diagnosis_cases() {
        let px = Plane::new(&[v2(1.0, 0.0)]).unwrap();
        let d = limit_plane_diagnosis(&vec![px.clone(); 5], 0.05).unwrap();
        assert!(d.converging);
        assert!(d.cauchy_defect.iter().all(|&v| v < 1e-12));

        // alternating between two lines at angle 0.3: defect stuck
        let tilted = {
            let phi = 0.3f64.asin();
            Plane::new(&[v2(phi.cos(), phi.sin())]).unwrap()
        };
        let seq = vec![
            px.clone(),
            tilted.clone(),
            px.clone(),
            tilted.clone(),
            px.clone(),
            tilted.clone(),
        ];
        let d = limit_plane_diagnosis(&seq, 0.05).unwrap();
        assert!(!d.converging);
        assert!((d.cauchy_defect[0] - 0.3).abs() < 1e-12);
        assert!((d.cauchy_defect[3] - 0.3).abs() < 1e-12);

        // permutation stability at equal scales
        let mut perm = seq.clone();
        perm.swap(0, 1);
        perm.swap(2, 3);
        let dp = limit_plane_diagnosis(&perm, 0.05).unwrap();
        assert_eq!(d.cauchy_defect, dp.cauchy_defect);
    }

    #[test]
    fn angle_lemma_small_suite() {
        let c = Constants::default();
        let report = verify_angle_lemma(2, 1, 200, 3, &c).unwrap();
        assert_eq!(report.violations, 0, "max ratio {}", report.max_ratio);
        assert!(report.admissible > 50, "admissible {}", report.admissible);
        assert!(report.max_ratio <= 1.0 + 1e-9, "calibration floor exceeded: {}", report.max_ratio);
    }

    #[test]
    fn angle_lemma_g31_suite() {
        let c = Constants::default();
        let report = verify_angle_lemma(3, 1, 2000, 11, &c).unwrap();
        assert_eq!(report.violations, 0, "max ratio {}", report.max_ratio);
        assert!(report.admissible > 500, "admissible {}", report.admissible);
        // an override below the observed maximum must report violations
        let low = Constants::new(report.max_ratio * 0.5).unwrap();
        let bad = verify_angle_lemma(3, 1, 2000, 11, &low).unwrap();
        assert!(bad.violations > 0);
    }

    #[test]
    fn w_bound_line_and_circle() {
        let (cloud, cert) = line_cert();
        let r = verify_w_bound(&cert, &cloud, 400, 5).unwrap();
        assert_eq!(r.violations, 0, "line w-bound margin {}", r.max_margin);
        assert!(r.checked > 100);

        let (cloud, cert) = circle_cert();
        let r = verify_w_bound(&cert, &cloud, 400, 5).unwrap();
        assert_eq!(r.violations, 0, "circle w-bound margin {}", r.max_margin);
    }

    #[test]
    fn w_bound_detects_understated_delta() {
        let (cloud, mut cert) = circle_cert();
        for v in cert.delta.iter_mut() {
            *v *= 1e-3;
        }
        for row in cert.ratios.iter_mut() {
            for v in row.iter_mut() {
                *v *= 1e-3;
            }
        }
        let r = verify_w_bound(&cert, &cloud, 400, 5).unwrap();
        assert!(r.violations > 0, "mutated certificate must violate the w bound");
    }

    #[test]
    fn fixed_plane_line_and_circle() {
        let (cloud, cert) = line_cert();
        let rep = verify_fixed_plane(&cert, &cloud, &Constants::default()).unwrap();
        assert_eq!(rep.theta_violations, 0, "margin {}", rep.theta_max_margin);
        let co = rep.coherence.expect("line δ̃ below 1/11");
        assert_eq!(co.violations, 0);
        assert!(co.max_angle < 2e-3);

        let (cloud, cert) = circle_cert();
        let rep = verify_fixed_plane(&cert, &cloud, &Constants::default()).unwrap();
        assert_eq!(rep.theta_violations, 0, "margin {}", rep.theta_max_margin);
        if let Some(co) = rep.coherence {
            assert_eq!(co.violations, 0, "coherence angle {} vs bound {}", co.max_angle, co.bound);
        }
        // δ̃ non-increasing by construction
        for w in rep.delta_tilde.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}
