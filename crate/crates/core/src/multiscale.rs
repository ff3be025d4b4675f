//! Radius ladders and the sum/integral sufficiency probes.
//!
//! A [`RadiusLadder`] is a strictly decreasing radius sequence with bounded
//! consecutive ratio r_i ≤ C·r_{i+1}. On a ladder profile the module
//! evaluates the convergence probes: the plain sum Σ θ(r_k), the integral
//! ∫ θ/r dr (log-scale quadrature over ladder annuli), the squared variant
//! ∫ θ²/r dr with its ε estimate, and the generalized ∫ θ^β/r^α dr.
//!
//! Divergence is always a verdict from model fitting (geometric vs power vs
//! harmonic growth of the increments), never a claim of proof; every verdict
//! carries the fitted model and its relative residual.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flatness::{FlatnessVerdict, ScaleProfile};

/// Strictly decreasing radii with bounded consecutive ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusLadder {
    /// Top scale R.
    pub top: f64,
    /// Ratio bound C > 1.
    pub ratio: f64,
    pub radii: Vec<f64>,
}

impl RadiusLadder {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::InvalidParameter("empty ladder".into()));
        }
        for r in &self.radii {
            if *r <= 0.0 {
                return Err(Error::InvalidParameter("ladder radii must be positive".into()));
            }
        }
        for w in self.radii.windows(2) {
            if !(w[1] < w[0] && w[0] <= self.ratio * w[1] * (1.0 + 1e-12)) {
                return Err(Error::InvalidParameter(format!(
                    "ladder ratio constraint violated at {} → {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Insert geometric midpoints between consecutive radii.
    pub fn refine(&self) -> RadiusLadder {
        let mut radii = Vec::with_capacity(self.radii.len() * 2 - 1);
        for w in self.radii.windows(2) {
            radii.push(w[0]);
            radii.push((w[0] * w[1]).sqrt());
        }
        radii.push(*self.radii.last().unwrap());
        RadiusLadder { top: self.top, ratio: self.ratio, radii }
    }
}

/// Geometric ladder r_k = R / C^{(2k+1)/4}, k = 1..depth — the midpoints of
/// the dyadic-in-log brackets (R/C^{(k+1)/2}, R/C^{k/2}). Consecutive ratio
/// is √C ≤ C.
pub fn ladder(top: f64, ratio: f64, depth: usize) -> Result<RadiusLadder> {
    if ratio <= 1.0 {
        return Err(Error::InvalidParameter("ladder ratio bound must be > 1".into()));
    }
    if top <= 0.0 || depth == 0 {
        return Err(Error::InvalidParameter("need top scale > 0 and depth ≥ 1".into()));
    }
    let radii: Vec<f64> = (1..=depth)
        .map(|k| top / ratio.powf((2 * k + 1) as f64 / 4.0))
        .collect();
    let l = RadiusLadder { top, ratio, radii };
    l.validate()?;
    Ok(l)
}

// ---------------------------------------------------------------------------
// Increment fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

/// The growth model fitted to the per-depth increments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub params: Vec<f64>,
    /// RMS of (model − observed)/observed over the fitted window.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    SumTheta,
    IntegralTheta,
    ToroThetaSquared,
    Generalized, // parameters carried separately
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub kind: ConditionKind,
    /// (α, β) for the generalized kind; (1,1), (1,2) otherwise.
    pub alpha: f64,
    pub beta: f64,
    /// Cumulative partial sums over reliable scales (non-decreasing).
    pub partial_values: Vec<f64>,
    pub verdict: Verdict,
    pub fit: FitReport,
    /// √total for the squared-integral kind when converging.
    pub epsilon_estimate: Option<f64>,
    pub notes: String,
}

fn linreg(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (0.0, sy / n);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

fn rel_residual(model: &[f64], obs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (m, o) in model.iter().zip(obs) {
        let denom = o.abs().max(1e-300);
        let d = (m - o) / denom;
        acc += d * d;
    }
    (acc / model.len() as f64).sqrt()
}

struct Fitted {
    report: FitReport,
    converging: Option<bool>, // None = model sheds no verdict
}

/// Fit geometric a·ρ^k, power a·k^{−p}, and harmonic c/(k+b) models to
/// positive increments indexed k = 1, 2, ….
fn fit_models(incr: &[f64]) -> Vec<Fitted> {
    let ks: Vec<f64> = (1..=incr.len()).map(|k| k as f64).collect();
    let mut out = Vec::new();
    if incr.iter().any(|&v| v <= 0.0) {
        return out;
    }
    let logs: Vec<f64> = incr.iter().map(|v| v.ln()).collect();

    // geometric: ln y = ln a + k ln ρ
    {
        let (slope, intercept) = linreg(&ks, &logs);
        let rho = slope.exp();
        let a = intercept.exp();
        let model: Vec<f64> = ks.iter().map(|&k| a * rho.powf(k)).collect();
        let residual = rel_residual(&model, incr);
        out.push(Fitted {
            report: FitReport {
                model: format!("geometric a·ρ^k, a={a:.3e}, ρ={rho:.4}"),
                params: vec![a, rho],
                residual,
            },
            converging: if rho < 0.97 { Some(true) } else { None },
        });
    }
    // power: ln y = ln a − p ln k
    {
        let lks: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let (slope, intercept) = linreg(&lks, &logs);
        let p = -slope;
        let a = intercept.exp();
        let model: Vec<f64> = ks.iter().map(|&k| a * k.powf(-p)).collect();
        let residual = rel_residual(&model, incr);
        out.push(Fitted {
            report: FitReport {
                model: format!("power a·k^-p, a={a:.3e}, p={p:.3}"),
                params: vec![a, p],
                residual,
            },
            converging: if p > 1.2 {
                Some(true)
            } else if p < 1.0 {
                Some(false)
            } else {
                None
            },
        });
    }
    // harmonic: 1/y = k/c + b/c  (covers 1/log-type growth on ladder scales)
    {
        let inv: Vec<f64> = incr.iter().map(|v| 1.0 / v).collect();
        let (slope, intercept) = linreg(&ks, &inv);
        if slope > 0.0 {
            let c = 1.0 / slope;
            let b = intercept * c;
            let model: Vec<f64> = ks.iter().map(|&k| c / (k + b)).collect();
            let residual = rel_residual(&model, incr);
            out.push(Fitted {
                report: FitReport {
                    model: format!("harmonic c/(k+b), c={c:.3e}, b={b:.3}"),
                    params: vec![c, b],
                    residual,
                },
                converging: Some(false),
            });
        } else {
            // non-decreasing increments: Σ certainly diverges
            let mean = incr.iter().sum::<f64>() / incr.len() as f64;
            let model: Vec<f64> = incr.iter().map(|_| mean).collect();
            let residual = rel_residual(&model, incr);
            out.push(Fitted {
                report: FitReport {
                    model: format!("constant c={mean:.3e}"),
                    params: vec![mean],
                    residual,
                },
                converging: Some(false),
            });
        }
    }
    out
}

/// Verdict from fitted increment models.
///
/// Increments at the sampling noise floor cannot support a divergence claim:
/// when every increment is ≤ 1.5× its slack-induced floor the series is
/// reported converging with a floor note.
fn verdict_from_increments(incr: &[f64], floors: &[f64]) -> (Verdict, FitReport, String) {
    const DIV_RESIDUAL: f64 = 0.10;
    const CONV_RESIDUAL: f64 = 0.25;
    if incr.iter().zip(floors).all(|(v, f)| *v <= 1.5 * f) {
        return (
            Verdict::Converging,
            FitReport { model: "below resolution floor".into(), params: vec![], residual: 0.0 },
            "all increments at the sampling noise floor; no growth is certifiable".into(),
        );
    }
    let fits = fit_models(incr);
    if fits.is_empty() {
        return (
            Verdict::Inconclusive,
            FitReport { model: "no positive increments".into(), params: vec![], residual: f64::NAN },
            "nonpositive increments; nothing to fit".into(),
        );
    }
    let mut best: Option<(&Fitted, bool)> = None;
    for f in &fits {
        let Some(conv) = f.converging else { continue };
        let limit = if conv { CONV_RESIDUAL } else { DIV_RESIDUAL };
        if f.report.residual < limit {
            match best {
                Some((b, _)) if b.report.residual <= f.report.residual => {}
                _ => best = Some((f, conv)),
            }
        }
    }
    match best {
        Some((f, true)) => (
            Verdict::Converging,
            f.report.clone(),
            format!("best fit {} (residual {:.1}%)", f.report.model, 100.0 * f.report.residual),
        ),
        Some((f, false)) => (
            Verdict::Diverging,
            f.report.clone(),
            format!("best fit {} (residual {:.1}%)", f.report.model, 100.0 * f.report.residual),
        ),
        None => {
            let f = fits
                .iter()
                .min_by(|a, b| a.report.residual.partial_cmp(&b.report.residual).unwrap())
                .unwrap();
            (
                Verdict::Inconclusive,
                f.report.clone(),
                "no growth model fits within residual limits".into(),
            )
        }
    }
}

fn ladder_rows(profile: &ScaleProfile) -> Result<Vec<(f64, f64, f64)>> {
    // (r, θ, slack) over reliable defined scales
    let rel = profile.reliable_theta();
    let rows: Vec<(f64, f64, f64)> = rel.iter().map(|&(_, r, t, s)| (r, t, s)).collect();
    // the profile radii must form a valid ladder
    let radii: Vec<f64> = profile.radii.clone();
    let mut ratio: f64 = 1.0;
    for w in radii.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidParameter("profile radii do not decrease".into()));
        }
        ratio = ratio.max(w[0] / w[1]);
    }
    let l = RadiusLadder { top: radii[0], ratio: ratio * (1.0 + 1e-12), radii };
    l.validate()?;
    Ok(rows)
}

/// Remark-style sum condition Σ_k θ(r_k) on a ladder profile.
pub fn sum_condition(profile: &ScaleProfile) -> Result<ConditionVerdict> {
    let rows = ladder_rows(profile)?;
    if rows.len() < 5 {
        return Ok(inconclusive(ConditionKind::SumTheta, 1.0, 1.0, "fewer than 5 reliable scales"));
    }
    let incr: Vec<f64> = rows.iter().map(|&(_, t, _)| t).collect();
    let floors: Vec<f64> = rows.iter().map(|&(_, _, s)| s).collect();
    let (verdict, fit, notes) = verdict_from_increments(&incr, &floors);
    Ok(ConditionVerdict {
        kind: ConditionKind::SumTheta,
        alpha: 1.0,
        beta: 1.0,
        partial_values: partial_sums(&incr),
        verdict,
        fit,
        epsilon_estimate: None,
        notes: note_with_selection(notes),
    })
}

/// Integral condition ∫ θ^β / r^α dr approximated by ladder-annulus
/// quadrature: the annulus (r_{k+1}, r_k] contributes θ(r_k)^β·w_k with
/// w_k = ln(r_k/r_{k+1}) for α = 1 and the closed-form power weight otherwise.
pub fn integral_condition(profile: &ScaleProfile, kind: ConditionKind, alpha: f64, beta: f64) -> Result<ConditionVerdict> {
    let (alpha, beta) = match kind {
        ConditionKind::IntegralTheta => (1.0, 1.0),
        ConditionKind::ToroThetaSquared => (1.0, 2.0),
        ConditionKind::Generalized => (alpha, beta),
        ConditionKind::SumTheta => {
            return Err(Error::InvalidParameter("use sum_condition for the plain sum".into()))
        }
    };
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(Error::InvalidParameter("generalized condition needs α, β > 0".into()));
    }
    let rows = ladder_rows(profile)?;
    if rows.len() < 5 {
        return Ok(inconclusive(kind, alpha, beta, "fewer than 5 reliable scales"));
    }
    let mut incr = Vec::with_capacity(rows.len() - 1);
    let mut floors = Vec::with_capacity(rows.len() - 1);
    for w in rows.windows(2) {
        let (rk, theta, slack) = w[0];
        let rk1 = w[1].0;
        let weight = if (alpha - 1.0).abs() < 1e-12 {
            (rk / rk1).ln()
        } else {
            (rk1.powf(1.0 - alpha) - rk.powf(1.0 - alpha)) / (alpha - 1.0)
        };
        incr.push(theta.powf(beta) * weight);
        floors.push(slack.powf(beta) * weight);
    }
    let (verdict, fit, notes) = verdict_from_increments(&incr, &floors);
    let partial = partial_sums(&incr);
    let epsilon_estimate = if kind == ConditionKind::ToroThetaSquared && verdict == Verdict::Converging {
        // extrapolate a convergent tail conservatively: double the last increment
        Some((partial.last().unwrap() + incr.last().unwrap()).sqrt())
    } else {
        None
    };
    Ok(ConditionVerdict {
        kind,
        alpha,
        beta,
        partial_values: partial,
        verdict,
        fit,
        epsilon_estimate,
        notes: note_with_selection(notes),
    })
}

fn note_with_selection(notes: String) -> String {
    // every verdict records the scale-selection convention
    format!("{notes}; θ evaluated at ladder radii (bracket midpoints)")
}

fn partial_sums(incr: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    incr.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn inconclusive(kind: ConditionKind, alpha: f64, beta: f64, why: &str) -> ConditionVerdict {
    ConditionVerdict {
        kind,
        alpha,
        beta,
        partial_values: vec![],
        verdict: Verdict::Inconclusive,
        fit: FitReport { model: "none".into(), params: vec![], residual: f64::NAN },
        epsilon_estimate: None,
        notes: note_with_selection(why.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Equivalence table
// ---------------------------------------------------------------------------

/// Chart extraction outcome for the separation table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChartStatus {
    /// Chart extracted at a threshold-qualified radius.
    Extracted { radius: f64, qualified: bool, df0: Option<f64>, derivative_continuous: Option<bool> },
    /// Injectivity margin failed at the attempted radius.
    MarginFailed { radius: f64 },
    NotAttempted { why: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub label: String,
    pub flatness: FlatnessVerdict,
    pub sum: Option<Verdict>,
    pub integral: Option<Verdict>,
    pub rpc_pass: bool,
    pub rpc_failing_clauses: Vec<String>,
    pub chart: ChartStatus,
    pub c1_truth: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceTable {
    pub rows: Vec<EquivalenceRow>,
    pub consistency_issues: Vec<String>,
}

/// Assemble the separation table and run the cross-consistency checks
/// (no set may be integral-converging yet RPC-failing).
pub fn equivalence_table(rows: Vec<EquivalenceRow>) -> EquivalenceTable {
    let mut issues = Vec::new();
    for row in &rows {
        if row.integral == Some(Verdict::Converging) && !row.rpc_pass {
            issues.push(format!(
                "{}: integral converging but certificate check failed",
                row.label
            ));
        }
        if row.integral == Some(Verdict::Converging) && row.flatness == FlatnessVerdict::NotFlat {
            issues.push(format!("{}: integral converging but profile not flat", row.label));
        }
    }
    EquivalenceTable { rows, consistency_issues: issues }
}

impl EquivalenceTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| set | flatness | sum | ∫θ/r | certificate | chart | C¹ truth |\n|---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let fmt_v = |v: &Option<Verdict>| match v {
                Some(Verdict::Converging) => "converging".to_string(),
                Some(Verdict::Diverging) => "diverging".to_string(),
                Some(Verdict::Inconclusive) => "inconclusive".to_string(),
                None => "—".to_string(),
            };
            let rpc = if r.rpc_pass {
                "pass".to_string()
            } else {
                format!("fail({})", r.rpc_failing_clauses.join("+"))
            };
            let chart = match &r.chart {
                ChartStatus::Extracted { qualified, df0, derivative_continuous, .. } => {
                    let mut s = if *qualified { "extracted".to_string() } else { "extracted (fallback radius)".to_string() };
                    if let Some(d) = df0 {
                        let _ = write!(s, ", |Df(0)|={d:.2e}");
                    }
                    if let Some(c) = derivative_continuous {
                        let _ = write!(s, ", Df {}", if *c { "continuous" } else { "discontinuous" });
                    }
                    s
                }
                ChartStatus::MarginFailed { radius } => format!("not a graph at r={radius:.2e}"),
                ChartStatus::NotAttempted { why } => format!("none ({why})"),
            };
            let _ = writeln!(
                out,
                "| {} | {:?} | {} | {} | {} | {} | {} |",
                r.label,
                r.flatness,
                fmt_v(&r.sum),
                fmt_v(&r.integral),
                rpc,
                chart,
                r.c1_truth
            );
        }
        if !self.consistency_issues.is_empty() {
            let _ = writeln!(out, "\nConsistency issues:");
            for i in &self.consistency_issues {
                let _ = writeln!(out, "- {i}");
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,flatness,sum,integral,rpc,chart,c1_truth\n");
        for r in &self.rows {
            let rpc = if r.rpc_pass { "pass".into() } else { format!("fail({})", r.rpc_failing_clauses.join("+")) };
            let chart = match &r.chart {
                ChartStatus::Extracted { qualified, .. } => {
                    if *qualified { "extracted" } else { "extracted-fallback" }.to_string()
                }
                ChartStatus::MarginFailed { .. } => "margin-failed".into(),
                ChartStatus::NotAttempted { .. } => "none".into(),
            };
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{},{},{}",
                r.label, r.flatness, r.sum, r.integral, rpc, chart, r.c1_truth
            );
        }
        out
    }
}
