//! Spreading limits of a block-shift bank against the closed form, and of a
//! quadrature bank against the spreading lower bound.

use std::f64::consts::FRAC_PI_2;

use spiral_embed::bank::{build_bank, spreading_limit_estimate, BankStrategy};
use spiral_embed::spaces::Space;
use spiral_embed::theory::{la_min_check, pab_lower_bound};

fn main() -> spiral_embed::Result<()> {
    let src = Space::lp(2, 3.0)?;
    let u = src.point(vec![1.0, 0.0])?;
    let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &Space::lp(12, 3.0)?, 0.0, 6, std::slice::from_ref(&u))?;
    println!("block shift in l3");
    for k in 0..=4 {
        let tau = k as f64 * FRAC_PI_2 / 4.0;
        let (c, s) = (tau.cos(), tau.sin());
        let est = spreading_limit_estimate(&bank, &u, &[c, s], 1e-12, 3)?;
        let closed = (c.powi(3) + s.powi(3)).cbrt();
        println!("  tau {tau:.4}: estimate {:.9}  closed form {closed:.9}  lower bound {:.9}", est.value, pab_lower_bound(c, s)?);
    }

    let l2 = Space::lp(2, 2.0)?;
    let u = l2.point(vec![0.6, 0.8])?;
    let strategy = BankStrategy::QuadratureL2ToL1 { directions: 64, seed: 1 };
    let bank = build_bank(strategy, &l2, &Space::lp(320, 1.0)?, 0.05, 5, std::slice::from_ref(&u))?;
    let est = spreading_limit_estimate(&bank, &u, &[1.0, 1.0], 1e-2, 2)?;
    println!("quadrature l2 -> l1: L(1,1) ~ {:.6}, oscillation {:.2e}", est.value, est.oscillation);

    let la = la_min_check(10001)?;
    println!("min over tau of the lower bound: {:.9} at {:.6}", la.min_value, la.argmin_tau);
    Ok(())
}
