//! Norms on finite-dimensional spaces and the overflow-safe evaluation.

use spiral_embed::spaces::{combine, LinearMap, NormSpec, Space};

fn main() -> spiral_embed::Result<()> {
    let specs = [
        ("l1", NormSpec::lp(1.0)),
        ("l2", NormSpec::lp(2.0)),
        ("l3.5", NormSpec::lp(3.5)),
        ("linf", NormSpec::linf()),
    ];
    for (name, spec) in specs {
        let s = Space::new(3, spec)?;
        let x = s.point(vec![3.0, -4.0, 12.0])?;
        let huge = x.scale(1e300);
        println!("{name:>5}: |x| = {:.6}  |1e300 x| / 1e300 = {:.6}", s.norm(&x)?, s.norm(&huge)? / 1e300);
    }

    let s = Space::lp(2, 2.0)?;
    let rot = LinearMap::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]], s.clone(), s.clone())?;
    let id = LinearMap::identity(&s);
    let x = s.point(vec![1.0, 0.0])?;
    for k in 0..=4 {
        let theta = k as f64 * std::f64::consts::FRAC_PI_8;
        let y = combine(theta, &id, &rot)?.apply(&x)?;
        println!("theta = {theta:.4}: cos E x + sin F x = {:?}, norm {:.6}", y.coords(), s.norm(&y)?);
    }
    Ok(())
}
