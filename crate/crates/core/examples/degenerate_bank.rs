//! A bank of `A` and `-A` cancels at τ = π/4; selection reports the witness.

use spiral_embed::bank::{build_bank, certification_set, select_subsequence, BankStrategy};
use spiral_embed::pointset::{decompose, LocallyFiniteSet};
use spiral_embed::schedule::{build_schedule, Params};
use spiral_embed::spaces::Space;
use spiral_embed::Error;

fn main() -> spiral_embed::Result<()> {
    let params = Params::uniform(0.01)?;
    let s = build_schedule(params, 1.0, 1, 0.01)?;
    let src = Space::lp(2, 2.0)?;
    let mid = (0.5 * (s.log_r(1) + s.log_big_r(1))).exp();
    let pts = LocallyFiniteSet::from_points(src.clone(), vec![src.point(vec![0.0, 0.0])?, src.point(vec![mid, 0.0])?])?;
    let dec = decompose(&pts, &s)?;
    let strategy = BankStrategy::UserMatrices {
        matrices: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![-1.0, 0.0], vec![0.0, -1.0]]],
    };
    let bank = build_bank(strategy, &src, &src, params.gamma, 2, &certification_set(&pts, 4, 0))?;
    match select_subsequence(&bank, &dec, params.zeta) {
        Err(e @ Error::BankExhausted { .. }) => println!("{e}"),
        Err(e) => return Err(e),
        Ok(sel) => println!("unexpected selection {:?}", sel.chosen),
    }
    Ok(())
}
