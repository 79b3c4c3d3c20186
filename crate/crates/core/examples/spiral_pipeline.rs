//! Full pipeline: schedule, points, bank, selection, gluing and the pair sweep.

use spiral_embed::bank::{build_bank, certification_set, select_subsequence, BankStrategy};
use spiral_embed::glue::GlueEmbedding;
use spiral_embed::pointset::{decompose, generate_annular, Placement};
use spiral_embed::schedule::{build_schedule, Params, WeightSystem};
use spiral_embed::spaces::Space;
use spiral_embed::verify::{distortion, VerifyOptions};

fn main() -> spiral_embed::Result<()> {
    let params = Params::uniform(0.05)?;
    let sched = build_schedule(params, 1.0, 3, 0.01)?;
    let src = Space::lp(2, 1.0)?;
    let tgt = Space::lp(10, 1.0)?;

    let pts = generate_annular(7, &sched, 8, &src, Placement::Mixed)?;
    let dec = decompose(&pts, &sched)?;
    println!("{} points, {} directions", pts.len(), dec.direction_count());

    let mut cert = certification_set(&pts, 32, 7);
    for l in &dec.levels {
        cert.extend(l.directions.iter().map(|d| d.u.clone()));
    }
    let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, params.gamma, 5, &cert)?;
    let sel = select_subsequence(&bank, &dec, params.zeta)?;
    println!("chosen bank indices {:?}, threshold {:.6}", sel.chosen, sel.threshold);

    let g = GlueEmbedding::new(WeightSystem::new(sched), bank, sel)?;
    let rep = distortion(&g, &pts, &VerifyOptions::default())?;
    println!(
        "pairs {}  ratio in [{:.6}, {:.6}]  distortion {:.6}  bound {:.6}",
        rep.pairs, rep.min_ratio, rep.max_ratio, rep.distortion, rep.bounds.ratio
    );
    for (name, s) in &rep.by_inequality {
        println!("  {name:<14} worst lower slack {:.3e}  worst upper slack {:.3e}", s.min_lower_slack, s.min_upper_slack);
    }
    Ok(())
}
