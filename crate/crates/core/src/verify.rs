//! Per-pair inequality checks and the all-pairs distortion sweep.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glue::{g_unchecked, GlueEmbedding};
use crate::pointset::{classify_log_norms, LocallyFiniteSet, PairClass};
use crate::schedule::{log_of, Region};
use crate::spaces::Point;
use crate::theory::{ray_lower, ray_upper, theoretical_bounds, TheoreticalBounds};

pub use crate::theory::{
    dt2_identity_fuzz, la_min_check, monotonicity_grid, pab_lower_bound, solve_params, LaMinCheck,
};

/// Default absolute slack for every asserted inequality.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub tolerance: f64,
    /// Worker threads for the pair sweep; `0` uses the rayon default.
    pub workers: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { tolerance: DEFAULT_TOLERANCE, workers: 0 }
    }
}

/// Names of the inequalities [`check_pair`] may assert.
pub mod inequality {
    /// `g(σ,w) − ε g(θ,v) ≤ ratio ≤ g(σ,w) + ε g(θ,v)`.
    pub const SANDWICH: &str = "sandwich";
    /// `T(x) − T(y) = G_σ(x−y) + 2 sin(Δτ/2) G_θ y`, residual `≤ tol`.
    pub const DECOMPOSITION: &str = "decomposition";
    /// `L_same ≤ ratio ≤ U_same` when `‖y‖ ≤ R_i` and `r_i < ‖x‖`.
    pub const SAME_LEVEL: &str = "same_level";
    /// `√2/(3(1+ζ)) ≤ ‖Ψ(x)‖/‖x‖ ≤ √2(1+γ)` when `r_i < ‖x‖`.
    pub const RAY: &str = "ray";
    /// `1 ≤ ratio ≤ 1+γ` on a single plateau.
    pub const PLATEAU: &str = "plateau";
    /// `‖y‖/‖x‖ ≤ δ`.
    pub const FAR_GAP: &str = "far_gap";
    /// `1/(1+δ) ≤ ‖x‖/‖x−y‖ ≤ 1/(1−δ)`.
    pub const FAR_NORM: &str = "far_norm";
    /// `L_far ≤ ratio ≤ U_far`.
    pub const FAR_RATIO: &str = "far_ratio";
}

/// One asserted inequality `lower ≤ value ≤ upper`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl InequalityCheck {
    pub fn lower_slack(&self) -> f64 {
        self.value - self.lower
    }

    pub fn upper_slack(&self) -> f64 {
        self.upper - self.value
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCheck {
    pub x_id: usize,
    pub y_id: usize,
    pub class: PairClass,
    /// `‖Ψ(x) − Ψ(y)‖ / ‖x − y‖`.
    pub ratio: f64,
    pub sigma: Option<f64>,
    pub theta: Option<f64>,
    pub g_sigma_w: Option<f64>,
    pub g_theta_v: Option<f64>,
    pub checks: Vec<InequalityCheck>,
    pub lower_slack: f64,
    pub upper_slack: f64,
}

impl PairCheck {
    /// The most violated check, if any slack is below `-tol`.
    pub fn violation(&self, tol: f64) -> Option<(&InequalityCheck, f64)> {
        self.checks
            .iter()
            .map(|c| (c, c.lower_slack().min(c.upper_slack())))
            .filter(|(_, s)| *s < -tol || s.is_nan())
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    fn to_error(&self, tol: f64) -> Option<Error> {
        self.violation(tol).map(|(c, slack)| Error::BoundViolated {
            inequality: c.name.to_string(),
            slack,
            x_id: self.x_id,
            y_id: self.y_id,
        })
    }
}

/// Checks every applicable inequality for `x ≠ y`; the points are swapped
/// if `‖x‖ < ‖y‖`. Ids in the result are 0 for `x` and 1 for `y`.
pub fn check_pair(g: &GlueEmbedding, x: &Point, y: &Point) -> Result<PairCheck> {
    check_pair_with(g, (0, x), (1, y), DEFAULT_TOLERANCE)
}

pub fn check_pair_with(
    g: &GlueEmbedding,
    x: (usize, &Point),
    y: (usize, &Point),
    tolerance: f64,
) -> Result<PairCheck> {
    let bounds = theoretical_bounds(g.schedule().params())?;
    let src = g.source();
    let (nx, ny) = (src.norm(x.1)?, src.norm(y.1)?);
    let (a, b) = if nx >= ny { ((x, nx), (y, ny)) } else { ((y, ny), (x, nx)) };
    let mut pc = evaluate_pair(g, &bounds, a, b)?;
    normalize_decomposition(&mut pc, tolerance);
    match pc.to_error(tolerance) {
        Some(e) => Err(e),
        None => Ok(pc),
    }
}

type Labeled<'a> = ((usize, &'a Point), f64);

/// All applicable checks for `‖x‖ ≥ ‖y‖`, without asserting them.
fn evaluate_pair(g: &GlueEmbedding, bounds: &TheoreticalBounds, x: Labeled, y: Labeled) -> Result<PairCheck> {
    let (((x_id, x), nx), ((y_id, y), ny)) = (x, y);
    if x.coords() == y.coords() {
        return Err(Error::InvalidPoint(format!("pair ({x_id}, {y_id}) repeats a point")));
    }
    let sched = g.schedule();
    let params = sched.params();
    let src = g.source();
    let tgt = g.target();
    let (lx, ly) = (log_of(nx), log_of(ny));
    let class = classify_log_norms(sched, lx, ly)?;

    let diff = x.sub(y);
    let nd = src.norm_unchecked(diff.coords());
    let px = g.evaluate_log(x.coords(), lx)?;
    let py = g.evaluate_log(y.coords(), ly)?;
    let img: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
    let ratio = tgt.norm_unchecked(&img) / nd;

    let mut out = PairCheck {
        x_id,
        y_id,
        class,
        ratio,
        sigma: None,
        theta: None,
        g_sigma_w: None,
        g_theta_v: None,
        checks: Vec::new(),
        lower_slack: f64::INFINITY,
        upper_slack: f64::INFINITY,
    };
    let push = |out: &mut PairCheck, name, lower, value, upper| {
        out.checks.push(InequalityCheck { name, lower, value, upper })
    };

    match class {
        PairClass::SameLevel { level: i } => {
            let ws = g.weights();
            let (e, f) = (g.psi(i), g.psi(i + 1));
            let tau_x = ws.tau_log(i, lx);
            if ny > 0.0 {
                let tau_y = ws.tau_log(i, ly);
                let theta = FRAC_PI_2 + 0.5 * (tau_x + tau_y);
                let w: Vec<f64> = diff.coords().iter().map(|c| c / nd).collect();
                let v: Vec<f64> = y.coords().iter().map(|c| c / ny).collect();
                let gsw = g_unchecked(tau_x, &w, e, f);
                let gtv = g_unchecked(theta, &v, e, f);
                out.sigma = Some(tau_x);
                out.theta = Some(theta);
                out.g_sigma_w = Some(gsw);
                out.g_theta_v = Some(gtv);
                push(&mut out, inequality::SANDWICH, gsw - params.eps * gtv, ratio, gsw + params.eps * gtv);
                let resid = g.decomposition_residual(i, x, y)?;
                push(&mut out, inequality::DECOMPOSITION, 0.0, resid, 0.0);
                if ly <= sched.log_big_r(i) && lx > sched.log_r(i) {
                    push(&mut out, inequality::SAME_LEVEL, bounds.l_same, ratio, bounds.u_same);
                }
            } else if lx > sched.log_r(i) {
                out.sigma = Some(tau_x);
                push(&mut out, inequality::RAY, ray_lower(params), ratio, ray_upper(params));
            }
            let rx = sched.locate_log(lx)?;
            let same_plateau = match rx {
                Region::Plateau(_) => ny == 0.0 || sched.locate_log(ly)? == rx,
                Region::Ramp(_) => false,
            };
            if same_plateau {
                push(&mut out, inequality::PLATEAU, 1.0, ratio, 1.0 + g.bank().gamma());
            }
        }
        PairClass::Far { .. } => {
            let delta = params.delta;
            push(&mut out, inequality::FAR_GAP, 0.0, (ly - lx).exp(), delta);
            push(&mut out, inequality::FAR_NORM, 1.0 / (1.0 + delta), nx / nd, 1.0 / (1.0 - delta));
            push(&mut out, inequality::FAR_RATIO, bounds.l_far, ratio, bounds.u_far);
        }
    }
    for c in &out.checks {
        out.lower_slack = out.lower_slack.min(c.lower_slack());
        out.upper_slack = out.upper_slack.min(c.upper_slack());
    }
    Ok(out)
}

/// The decomposition check has a zero-width bracket; its slack is measured
/// against `tol` instead of 0.
fn normalize_decomposition(pc: &mut PairCheck, tol: f64) {
    for c in &mut pc.checks {
        if c.name == inequality::DECOMPOSITION {
            c.upper = tol;
        }
    }
    pc.lower_slack = pc.checks.iter().map(InequalityCheck::lower_slack).fold(f64::INFINITY, f64::min);
    pc.upper_slack = pc.checks.iter().map(InequalityCheck::upper_slack).fold(f64::INFINITY, f64::min);
}

/// Evaluates every unordered pair of `pts`, in index order.
pub fn sweep(g: &GlueEmbedding, pts: &LocallyFiniteSet, opts: &VerifyOptions) -> Result<Vec<PairCheck>> {
    let bounds = theoretical_bounds(g.schedule().params())?;
    for &n in pts.norms() {
        g.schedule().check_covered(log_of(n))?;
    }
    let all = pts.points();
    let norms = pts.norms();
    let pairs: Vec<(usize, usize)> = (0..all.len()).flat_map(|a| (a + 1..all.len()).map(move |b| (a, b))).collect();
    let run = || {
        pairs
            .par_iter()
            .map(|&(a, b)| {
                let (a, b) = if norms[a] >= norms[b] { (a, b) } else { (b, a) };
                let x = ((all[a].0, &all[a].1), norms[a]);
                let y = ((all[b].0, &all[b].1), norms[b]);
                let mut pc = evaluate_pair(g, &bounds, x, y)?;
                normalize_decomposition(&mut pc, opts.tolerance);
                Ok(pc)
            })
            .collect::<Result<Vec<_>>>()
    };
    if opts.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlackSummary {
    pub count: usize,
    pub min_lower_slack: f64,
    pub min_upper_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassSummary {
    pub count: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`; 1 when there are no pairs.
    pub distortion: f64,
    pub min_witness: Option<(usize, usize)>,
    pub max_witness: Option<(usize, usize)>,
    pub bounds: TheoreticalBounds,
    pub tolerance: f64,
    pub worst_lower_slack: f64,
    pub worst_upper_slack: f64,
    pub by_inequality: BTreeMap<String, SlackSummary>,
    pub by_class: BTreeMap<String, ClassSummary>,
}

/// Aggregates pair checks without asserting anything.
pub fn summarize(checks: &[PairCheck], bounds: TheoreticalBounds, tolerance: f64) -> DistortionReport {
    let mut r = DistortionReport {
        pairs: checks.len(),
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        distortion: 1.0,
        min_witness: None,
        max_witness: None,
        bounds,
        tolerance,
        worst_lower_slack: f64::INFINITY,
        worst_upper_slack: f64::INFINITY,
        by_inequality: BTreeMap::new(),
        by_class: BTreeMap::new(),
    };
    for pc in checks {
        if pc.ratio < r.min_ratio {
            r.min_ratio = pc.ratio;
            r.min_witness = Some((pc.x_id, pc.y_id));
        }
        if pc.ratio > r.max_ratio {
            r.max_ratio = pc.ratio;
            r.max_witness = Some((pc.x_id, pc.y_id));
        }
        r.worst_lower_slack = r.worst_lower_slack.min(pc.lower_slack);
        r.worst_upper_slack = r.worst_upper_slack.min(pc.upper_slack);
        for c in &pc.checks {
            let s = r.by_inequality.entry(c.name.to_string()).or_insert(SlackSummary {
                count: 0,
                min_lower_slack: f64::INFINITY,
                min_upper_slack: f64::INFINITY,
            });
            s.count += 1;
            s.min_lower_slack = s.min_lower_slack.min(c.lower_slack());
            s.min_upper_slack = s.min_upper_slack.min(c.upper_slack());
        }
        let cs = r.by_class.entry(pc.class.label()).or_insert(ClassSummary {
            count: 0,
            min_ratio: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
        });
        cs.count += 1;
        cs.min_ratio = cs.min_ratio.min(pc.ratio);
        cs.max_ratio = cs.max_ratio.max(pc.ratio);
    }
    if checks.is_empty() {
        r.min_ratio = 1.0;
        r.max_ratio = 1.0;
    } else {
        r.distortion = r.max_ratio / r.min_ratio;
    }
    r
}

/// First violated inequality among `checks`, then the distortion bound.
pub fn assert_checks(checks: &[PairCheck], report: &DistortionReport) -> Result<()> {
    let tol = report.tolerance;
    let worst = checks
        .iter()
        .filter_map(|pc| pc.violation(tol).map(|(_, s)| (pc, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((pc, _)) = worst {
        return Err(pc.to_error(tol).expect("violation found"));
    }
    let slack = report.bounds.ratio - report.distortion;
    if slack < -tol || slack.is_nan() {
        let (x_id, y_id) = report.max_witness.unwrap_or((0, 0));
        return Err(Error::BoundViolated { inequality: "distortion".into(), slack, x_id, y_id });
    }
    Ok(())
}

/// Sweeps all pairs, asserts every inequality, and bounds the distortion by
/// the theoretical ratio.
pub fn distortion(g: &GlueEmbedding, pts: &LocallyFiniteSet, opts: &VerifyOptions) -> Result<DistortionReport> {
    let checks = sweep(g, pts, opts)?;
    let report = summarize(&checks, theoretical_bounds(g.schedule().params())?, opts.tolerance);
    assert_checks(&checks, &report)?;
    Ok(report)
}

/// Per-pair CSV: `x_id,y_id,class,ratio,lower_slack,upper_slack`.
pub fn write_pairs_csv<W: Write>(checks: &[PairCheck], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x_id", "y_id", "class", "ratio", "lower_slack", "upper_slack"])?;
    for pc in checks {
        wr.write_record([
            pc.x_id.to_string(),
            pc.y_id.to_string(),
            pc.class.label(),
            format!("{:?}", pc.ratio),
            format!("{:?}", pc.lower_slack),
            format!("{:?}", pc.upper_slack),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
