//! Prints the angle and partition-of-unity weights across a three-level schedule.

use spiral_embed::schedule::{build_schedule, Params, WeightSystem};

fn main() -> spiral_embed::Result<()> {
    let s = build_schedule(Params::new(0.5, 0.2, 0.05, 0.05)?, 1.0, 3, 0.0)?;
    let (r, big) = s.radii()?;
    for i in 0..r.len() {
        println!("level {}: r = {:.4e}  R = {:.4e}", i + 1, r[i], big[i]);
    }
    let ws = WeightSystem::new(s);
    let report = ws.check_weight_conditions(64)?;
    println!("{report:?}");

    println!("{:>12} {}", "t", (1..=ws.levels() + 1).map(|j| format!("{:>8}", format!("mu_{j}"))).collect::<String>());
    for (lt, mus) in ws.weights_table_log(24)? {
        let row: String = mus.iter().map(|m| format!("{m:>8.4}")).collect();
        println!("{:>12.4e} {row}", lt.exp());
    }
    Ok(())
}
