use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spiral_embed::pointset::{generate_annular, Placement};
use spiral_embed::run::{execute, write_outputs, write_weights_csv, PointsSpec, RunConfig};
use spiral_embed::schedule::{Params, WeightSystem};
use spiral_embed::theory::{run_theory_checks, theoretical_bounds};
use spiral_embed::verify::{solve_params, write_pairs_csv, VerifyOptions, DEFAULT_TOLERANCE};

#[derive(Parser)]
#[command(name = "spiral-embed", version, about = "Spiral-glued bilipschitz embeddings of finite point sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the closed-form ratio bounds for a parameter choice.
    Bounds(BoundsArgs),
    /// Run the full pipeline from a config file.
    Run(RunArgs),
    /// Scalar theory checks: spreading minimum, bound monotonicity, identity fuzzing.
    Theory(TheoryArgs),
    /// Write the weight curves of a schedule as CSV.
    Weights(WeightsArgs),
    /// Generate a point set from a config's schedule.
    GenPoints(GenArgs),
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    /// Solve for parameters with ratio at most 3 + TARGET.
    #[arg(long, conflicts_with_all = ["eps", "delta", "gamma", "zeta"])]
    target: Option<f64>,
    /// Take parameters from a run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for the outputs named in the config (default: the config's directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the point generator seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 10001)]
    grid: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_level: Option<usize>,
    #[arg(long, value_parser = parse_placement)]
    placement: Option<Placement>,
}

fn parse_placement(s: &str) -> Result<Placement, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn emit(json: &str, out: Option<&Path>) -> Result<()> {
    println!("{json}");
    if let Some(p) = out {
        fs::write(p, json).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let params = if let Some(t) = a.target {
        solve_params(t)?
    } else if let Some(cfg) = &a.config {
        RunConfig::load(cfg)?.resolve_params()?
    } else {
        match (a.eps, a.delta, a.gamma, a.zeta) {
            (Some(e), Some(d), Some(g), Some(z)) => Params::new(e, d, g, z)?,
            _ => bail!("give --eps, --delta, --gamma and --zeta, or --target, or --config"),
        }
    };
    let b = theoretical_bounds(&params)?;
    let json = serde_json::to_string_pretty(&serde_json::json!({ "params": params, "bounds": b }))?;
    emit(&json, a.out.as_deref())
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg = cfg.with_seed(s);
    }
    let base = config_dir(&a.config);
    let out_dir = a.out.clone().unwrap_or_else(|| base.clone());
    fs::create_dir_all(&out_dir)?;
    let opts = VerifyOptions { tolerance: a.tolerance, workers: a.workers };
    match execute(&cfg, &base, &opts) {
        Ok(out) => {
            write_outputs(&out, &out_dir)?;
            let d = &out.report.distortion;
            println!(
                "pairs={} distortion={:.9} bound={:.9} worst_lower_slack={:e} worst_upper_slack={:e} chosen={:?}",
                d.pairs,
                d.distortion,
                d.bounds.ratio,
                d.worst_lower_slack,
                d.worst_upper_slack,
                out.report.selection.chosen
            );
            Ok(())
        }
        Err(failed) => {
            if let (false, Some(p)) = (failed.checks.is_empty(), &cfg.output.pairs_csv) {
                write_pairs_csv(&failed.checks, fs::File::create(out_dir.join(p))?)?;
            }
            Err(failed.error.into())
        }
    }
}

fn theory(a: TheoryArgs) -> Result<()> {
    let r = run_theory_checks(a.grid, a.trials, a.seed)?;
    emit(&serde_json::to_string_pretty(&r)?, a.out.as_deref())?;
    if !r.passed() {
        bail!(
            "theory checks failed: la min {} at {}, monotone {}, identity residual {:e}",
            r.la.min_value,
            r.la.argmin_tau,
            r.monotone,
            r.dt2_max_residual
        );
    }
    Ok(())
}

fn weights(a: WeightsArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let ws = WeightSystem::new(cfg.build_schedule()?);
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_weights_csv(&ws, a.grid, file)?;
    Ok(())
}

fn gen_points(a: GenArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let sched = cfg.build_schedule()?;
    let (seed, per_level, placement) = match &cfg.points {
        PointsSpec::Generate(g) => (g.seed, g.per_level, g.placement),
        _ => (0, 10, Placement::Mixed),
    };
    let pts = generate_annular(
        a.seed.unwrap_or(seed),
        &sched,
        a.per_level.unwrap_or(per_level),
        &cfg.source,
        a.placement.unwrap_or(placement),
    )?;
    pts.save(&a.out)?;
    println!("wrote {} points to {}", pts.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Bounds(a) => bounds(a),
        Cmd::Run(a) => run(a),
        Cmd::Theory(a) => theory(a),
        Cmd::Weights(a) => weights(a),
        Cmd::GenPoints(a) => gen_points(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
