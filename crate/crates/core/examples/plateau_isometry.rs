//! On a single plateau the glued map is one bank map, so pair ratios stay in
//! `[1, 1 + γ]`.

use std::path::Path;

use spiral_embed::run::{execute, RunConfig};
use spiral_embed::verify::VerifyOptions;

const CFG: &str = r#"{
    "source": {"dim": 3, "norm": {"norm": "lp", "p": 3.0}},
    "target": {"dim": 6, "norm": {"norm": "lp", "p": 3.0}},
    "params": {"eps": 0.3, "delta": 0.1, "gamma": 0.05, "zeta": 0.05},
    "schedule": {"r1": 10.0, "levels": 1},
    "points": {"generate": {"seed": 3, "per_level": 12, "placement": "plateau"}},
    "bank": {"strategy": "block_shift", "count": 2}
}"#;

fn main() -> spiral_embed::Result<()> {
    let cfg = RunConfig::from_json(CFG)?;
    let out = execute(&cfg, Path::new("."), &VerifyOptions::default()).map_err(|f| f.error)?;
    let sched = out.embedding.schedule();
    let first: Vec<usize> = out
        .points
        .points()
        .iter()
        .zip(out.points.norms())
        .filter(|(_, n)| n.ln() <= sched.log_r(1))
        .map(|((id, _), _)| *id)
        .collect();
    let same: Vec<f64> = out
        .checks
        .iter()
        .filter(|c| first.contains(&c.x_id) && first.contains(&c.y_id))
        .map(|c| c.ratio)
        .collect();
    let lo = same.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = same.iter().cloned().fold(0.0, f64::max);
    println!("{} pairs on the first plateau, ratios in [{lo:.9}, {hi:.9}], 1 + gamma = {}", same.len(), 1.0 + out.report.bank.gamma);
    Ok(())
}
