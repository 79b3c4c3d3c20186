//! JSON run configuration and the end-to-end pipeline
//! schedule → points → bank → selection → glue → verify.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bank::{build_bank, certification_set, select_subsequence, BankStrategy, Certificate, SelectionResult};
use crate::error::{Error, Result};
use crate::glue::{GlueEmbedding, Image};
use crate::pointset::{decompose, generate_annular, LocallyFiniteSet, Placement};
use crate::schedule::{build_schedule, Params, RadiiSchedule, ScheduleExport, WeightSystem};
use crate::spaces::{Point, Space};
use crate::theory::solve_params;
use crate::verify::{assert_checks, summarize, sweep, write_pairs_csv, DistortionReport, PairCheck, VerifyOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub r1: f64,
    pub levels: usize,
    #[serde(default)]
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub per_level: usize,
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointsSpec {
    Generate(GeneratorSpec),
    Inline(Vec<Vec<f64>>),
    /// A point-set JSON file, relative to the config file.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    #[serde(flatten)]
    pub strategy: BankStrategy,
    pub count: usize,
    /// Budget for the bank; defaults to the parameters' `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub random_certify: usize,
    #[serde(default)]
    pub certify_seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: Space,
    pub target: Space,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_target: Option<f64>,
    pub schedule: ScheduleSpec,
    pub points: PointsSpec,
    pub bank: BankSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.resolve_params()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `params`, or [`solve_params`] of `eps_target`; exactly one must be set.
    pub fn resolve_params(&self) -> Result<Params> {
        match (self.params, self.eps_target) {
            (Some(p), None) => Ok(p),
            (None, Some(t)) => solve_params(t),
            _ => Err(Error::Config("exactly one of params and eps_target must be given".into())),
        }
    }

    pub fn build_schedule(&self) -> Result<RadiiSchedule> {
        let s = &self.schedule;
        build_schedule(self.resolve_params()?, s.r1, s.levels, s.margin)
    }

    /// The point set, with `file` paths resolved against `base_dir`.
    pub fn build_points(&self, sched: &RadiiSchedule, base_dir: &Path) -> Result<LocallyFiniteSet> {
        match &self.points {
            PointsSpec::Generate(g) => generate_annular(g.seed, sched, g.per_level, &self.source, g.placement),
            PointsSpec::Inline(rows) => {
                let pts = rows.iter().map(|c| self.source.point(c.clone())).collect::<Result<Vec<_>>>()?;
                LocallyFiniteSet::from_points(self.source.clone(), pts)
            }
            PointsSpec::File(p) => {
                let path = base_dir.join(p);
                if !path.exists() {
                    return Err(Error::Config(format!("point file {} does not exist", path.display())));
                }
                let set = LocallyFiniteSet::load(&path)?;
                if set.space() != &self.source {
                    return Err(Error::Config(format!("point file {} uses a different space", path.display())));
                }
                Ok(set)
            }
        }
    }

    /// Replaces the generator seed, if points are generated.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let PointsSpec::Generate(g) = &mut self.points {
            g.seed = seed;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BankSummary {
    pub count: usize,
    pub gamma: f64,
    pub eps_n: f64,
    pub certify_vectors: usize,
    pub achieved_slack: f64,
    pub certificates: Vec<Certificate>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub schedule_ms: f64,
    pub points_ms: f64,
    pub bank_ms: f64,
    pub selection_ms: f64,
    pub verify_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub params: Params,
    pub schedule: ScheduleExport,
    pub points: usize,
    pub bank: BankSummary,
    pub selection: SelectionResult,
    pub distortion: DistortionReport,
    /// Wall-clock timings; everything else is deterministic.
    pub timings: Timings,
}

impl RunReport {
    /// JSON without the `timings` field.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub checks: Vec<PairCheck>,
    pub embedding: GlueEmbedding,
    pub points: LocallyFiniteSet,
}

/// Pair checks of a run that violated an inequality, with the error.
#[derive(Debug)]
pub struct FailedRun {
    pub error: Error,
    pub checks: Vec<PairCheck>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the full pipeline. A `BoundViolated` outcome keeps the pair checks so
/// they can still be written out.
pub fn execute(cfg: &RunConfig, base_dir: &Path, opts: &VerifyOptions) -> std::result::Result<RunOutput, FailedRun> {
    let fail = |error| FailedRun { error, checks: Vec::new() };
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let params = cfg.resolve_params().map_err(fail)?;
    let sched = cfg.build_schedule().map_err(fail)?;
    timings.schedule_ms = ms(t);

    let t = Instant::now();
    let pts = cfg.build_points(&sched, base_dir).map_err(fail)?;
    let decomp = decompose(&pts, &sched).map_err(fail)?;
    timings.points_ms = ms(t);

    let t = Instant::now();
    let mut cert = certification_set(&pts, cfg.bank.random_certify, cfg.bank.certify_seed);
    for l in &decomp.levels {
        cert.extend(l.directions.iter().map(|d| d.u.clone()));
    }
    let gamma = cfg.bank.gamma.unwrap_or(params.gamma);
    let bank = build_bank(cfg.bank.strategy.clone(), &cfg.source, &cfg.target, gamma, cfg.bank.count, &cert)
        .map_err(fail)?;
    timings.bank_ms = ms(t);

    let t = Instant::now();
    let selection = select_subsequence(&bank, &decomp, params.zeta).map_err(fail)?;
    timings.selection_ms = ms(t);

    let summary = BankSummary {
        count: bank.len(),
        gamma: bank.gamma(),
        eps_n: bank.eps_n()[0],
        certify_vectors: cert.len(),
        achieved_slack: bank.achieved_slack(),
        certificates: bank.certificates().to_vec(),
    };
    let embedding = GlueEmbedding::new(WeightSystem::new(sched.clone()), bank, selection.clone()).map_err(fail)?;

    let t = Instant::now();
    let checks = sweep(&embedding, &pts, opts).map_err(fail)?;
    let bounds = crate::theory::theoretical_bounds(&params).map_err(fail)?;
    let distortion = summarize(&checks, bounds, opts.tolerance);
    if let Err(error) = assert_checks(&checks, &distortion) {
        return Err(FailedRun { error, checks });
    }
    timings.verify_ms = ms(t);
    timings.total_ms = ms(start);

    let report = RunReport {
        config: cfg.clone(),
        params,
        schedule: sched.export(),
        points: pts.len(),
        bank: summary,
        selection,
        distortion,
        timings,
    };
    Ok(RunOutput { report, checks, embedding, points: pts })
}

/// Writes the report JSON, pair CSV, and images named in `cfg.output`, with
/// relative paths resolved against `out_dir`.
pub fn write_outputs(out: &RunOutput, out_dir: &Path) -> Result<()> {
    let o = &out.report.config.output;
    if let Some(p) = &o.report {
        fs::write(out_dir.join(p), serde_json::to_string_pretty(&out.report)?)?;
    }
    if let Some(p) = &o.pairs_csv {
        write_pairs_csv(&out.checks, fs::File::create(out_dir.join(p))?)?;
    }
    if let Some(p) = &o.images {
        let images: Vec<Image> = out.embedding.embed_all(&out.points)?;
        fs::write(out_dir.join(p), serde_json::to_string_pretty(&images)?)?;
    }
    Ok(())
}

/// Weights CSV: `t,mu_1,…,mu_{m+1}` on `n` log-spaced points.
pub fn write_weights_csv<W: Write>(ws: &WeightSystem, n: usize, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=ws.levels() + 1).map(|j| format!("mu_{j}")));
    wr.write_record(&header)?;
    for (lt, mus) in ws.weights_table_log(n)? {
        let t = lt.exp();
        if !t.is_finite() {
            return Err(Error::Overflow { what: "weights grid".into(), log_value: lt });
        }
        let mut row = vec![format!("{t:?}")];
        row.extend(mus.iter().map(|m| format!("{m:?}")));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Convenience for callers holding raw coordinates.
pub fn points_from_rows(space: &Space, rows: &[Vec<f64>]) -> Result<Vec<Point>> {
    rows.iter().map(|r| space.point(r.clone())).collect()
}
