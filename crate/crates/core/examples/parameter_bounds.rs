//! Closed-form ratio bounds, their monotonicity, and solving for a target.

use spiral_embed::schedule::Params;
use spiral_embed::theory::{monotonicity_grid, solve_params, theoretical_bounds};

fn main() -> spiral_embed::Result<()> {
    for s in [0.1, 0.05, 0.01, 0.001] {
        let b = theoretical_bounds(&Params::uniform(s)?)?;
        println!(
            "uniform {s:<6}: L_same {:.6} U_same {:.6} L_far {:.6} U_far {:.6} ratio {:.9}",
            b.l_same, b.u_same, b.l_far, b.u_far, b.ratio
        );
    }
    let grid = monotonicity_grid(&Params::uniform(0.1)?, 8)?;
    println!("halving all parameters: {grid:.6?}");
    for target in [1.0, 0.5, 0.1] {
        let p = solve_params(target)?;
        println!("target 3 + {target}: eps {:.4e}, ratio {:.6}", p.eps, theoretical_bounds(&p)?.ratio);
    }
    Ok(())
}
