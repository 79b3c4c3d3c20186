//! Closed-form bound arithmetic and the scalar checks behind the `√2/3`
//! spreading lower bound.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::Params;
use crate::spaces::blend;

/// Lower/upper ratio bounds for same-level and far pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoreticalBounds {
    pub l_same: f64,
    pub u_same: f64,
    pub l_far: f64,
    pub u_far: f64,
    pub ratio: f64,
}

impl TheoreticalBounds {
    pub fn lower(&self) -> f64 {
        self.l_same.min(self.l_far)
    }

    pub fn upper(&self) -> f64 {
        self.u_same.max(self.u_far)
    }
}

/// `√2/(3(1+ζ))`, the guaranteed size of every selected blend.
pub fn ray_lower(p: &Params) -> f64 {
    SQRT_2 / (3.0 * (1.0 + p.zeta))
}

/// `√2(1+γ)`, the certified ceiling on any blend.
pub fn ray_upper(p: &Params) -> f64 {
    SQRT_2 * (1.0 + p.gamma)
}

pub fn theoretical_bounds(p: &Params) -> Result<TheoreticalBounds> {
    let lo = ray_lower(p);
    let hi = ray_upper(p);
    let l_same = lo - p.eps * hi;
    let u_same = hi * (1.0 + p.eps);
    let l_far = (lo - hi * p.delta) / (1.0 + p.delta);
    let u_far = hi * (1.0 + p.delta) / (1.0 - p.delta);
    if l_same <= 0.0 {
        return Err(Error::NonPositiveLowerBound { which: "L_same", value: l_same });
    }
    if l_far <= 0.0 {
        return Err(Error::NonPositiveLowerBound { which: "L_far", value: l_far });
    }
    let ratio = u_same.max(u_far) / l_same.min(l_far);
    Ok(TheoreticalBounds { l_same, u_same, l_far, u_far, ratio })
}

/// Shrinks a common scale `s = 1/2, 1/4, …` on all four parameters until
/// `min L ≥ √2/(3√(1+t/3))` and `max U ≤ √2·√(1+t/3)`, which gives
/// `ratio ≤ 3 + t`.
pub fn solve_params(eps_target: f64) -> Result<Params> {
    if eps_target.is_nan() || eps_target <= 0.0 {
        return Err(Error::InvalidParams(format!("eps_target must be positive, got {eps_target}")));
    }
    let k = (1.0 + eps_target / 3.0).sqrt();
    let (need_lo, need_hi) = (SQRT_2 / (3.0 * k), SQRT_2 * k);
    let mut s = 0.5;
    for _ in 0..200 {
        let p = Params::uniform(s)?;
        if let Ok(b) = theoretical_bounds(&p) {
            if b.lower() >= need_lo && b.upper() <= need_hi {
                return Ok(p);
            }
        }
        s *= 0.5;
    }
    unreachable!("bounds converge to √2/3 and √2 as the scale shrinks")
}

/// `ratio` of [`theoretical_bounds`] along `base·2^{-k}`, `k = 0..=steps`.
pub fn monotonicity_grid(base: &Params, steps: usize) -> Result<Vec<f64>> {
    (0..=steps)
        .map(|k| Ok(theoretical_bounds(&base.scaled(0.5f64.powi(k as i32))?)?.ratio))
        .collect()
}

/// `max{c(c+s)/(c+2s), s(c+s)/(2c+s)}`.
pub fn pab_lower_bound(c: f64, s: f64) -> Result<f64> {
    if c < 0.0 || s < 0.0 || c.is_nan() || s.is_nan() {
        return Err(Error::InvalidParams(format!("coefficients must be nonnegative, got ({c}, {s})")));
    }
    if c == 0.0 && s == 0.0 {
        return Err(Error::BothZero);
    }
    let (p, q) = pab_parts(c, s);
    Ok(p.max(q))
}

fn pab_parts(c: f64, s: f64) -> (f64, f64) {
    (c * (c + s) / (c + 2.0 * s), s * (c + s) / (2.0 * c + s))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaMinCheck {
    pub grid_size: usize,
    pub min_value: f64,
    pub argmin_tau: f64,
    pub value_at_0: f64,
    pub value_at_half_pi: f64,
    /// `p(τ) = c(c+s)/(c+2s)` is non-increasing on `[0, π/4]`.
    pub p_nonincreasing: bool,
    /// `q(τ) = s(c+s)/(2c+s)` is non-decreasing on `[π/4, π/2]`.
    pub q_nondecreasing: bool,
}

impl LaMinCheck {
    pub fn passed(&self) -> bool {
        self.p_nonincreasing && self.q_nondecreasing
    }
}

/// Minimises [`pab_lower_bound`]`(cos τ, sin τ)` over a uniform grid on
/// `[0, π/2]`.
pub fn la_min_check(grid_size: usize) -> Result<LaMinCheck> {
    if grid_size < 3 {
        return Err(Error::InvalidParams("grid needs at least 3 points".into()));
    }
    let mut out = LaMinCheck {
        grid_size,
        min_value: f64::INFINITY,
        argmin_tau: 0.0,
        value_at_0: 0.0,
        value_at_half_pi: 0.0,
        p_nonincreasing: true,
        q_nondecreasing: true,
    };
    let mut prev: Option<(f64, f64, f64)> = None;
    for k in 0..grid_size {
        let tau = if k == grid_size - 1 { FRAC_PI_2 } else { FRAC_PI_2 * k as f64 / (grid_size - 1) as f64 };
        let (c, s) = crate::schedule::cos_sin(tau);
        let (p, q) = pab_parts(c, s);
        let v = p.max(q);
        if v < out.min_value {
            out.min_value = v;
            out.argmin_tau = tau;
        }
        if let Some((pt, pp, pq)) = prev {
            if tau <= FRAC_PI_4 && p > pp + 1e-15 {
                out.p_nonincreasing = false;
            }
            if pt >= FRAC_PI_4 && q < pq - 1e-15 {
                out.q_nondecreasing = false;
            }
        }
        prev = Some((tau, p, q));
        if k == 0 {
            out.value_at_0 = v;
        }
        if k == grid_size - 1 {
            out.value_at_half_pi = v;
        }
    }
    Ok(out)
}

/// Fuzzes the identity
/// `T(x) − T(y) = G_σ(x−y) + 2 sin((τ_x − τ_y)/2)·G_θ y`, `θ = π/2 + (τ_x+τ_y)/2`
/// with random matrices `E`, `F`, vectors, and angles; returns the largest
/// residual relative to `‖x‖ + ‖y‖` in the Euclidean norm.
pub fn dt2_identity_fuzz(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let euclid = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for _ in 0..trials {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(1..=6);
        let mat = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect() };
        let (e, f) = (mat(&mut rng), mat(&mut rng));
        let apply = |m: &[f64], x: &[f64]| -> Vec<f64> {
            (0..n).map(|r| (0..d).map(|c| m[r * d + c] * x[c]).sum()).collect()
        };
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tx = rng.random_range(0.0..FRAC_PI_2);
        let ty = rng.random_range(0.0..FRAC_PI_2);
        let g = |theta: f64, v: &[f64]| blend(theta.cos(), &apply(&e, v), theta.sin(), &apply(&f, v));
        let lhs: Vec<f64> = g(tx, &x).iter().zip(g(ty, &y)).map(|(a, b)| a - b).collect();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let k = 2.0 * (0.5 * (tx - ty)).sin();
        let rhs = blend(1.0, &g(tx, &diff), k, &g(FRAC_PI_2 + 0.5 * (tx + ty), &y));
        let resid: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let scale = euclid(&x) + euclid(&y);
        if scale > 0.0 {
            worst = worst.max(euclid(&resid) / scale);
        }
    }
    worst
}

/// Outcome of the scalar theory checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryReport {
    pub la: LaMinCheck,
    /// `(τ, pab(cos τ, sin τ))` at multiples of `π/24`.
    pub pab_samples: Vec<(f64, f64)>,
    /// Ratios along `(0.1, 0.1, 0.1, 0.1)·2^{-k}`, `k = 0..=20`.
    pub monotonicity: Vec<f64>,
    pub monotone: bool,
    pub dt2_trials: usize,
    pub dt2_max_residual: f64,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.la.passed()
            && (self.la.min_value - SQRT_2 / 3.0).abs() <= 1e-6
            && self.pab_samples.iter().all(|&(_, v)| v >= SQRT_2 / 3.0 - 1e-12)
            && self.monotone
            && self.dt2_max_residual <= 1e-9
    }
}

pub fn run_theory_checks(grid: usize, trials: usize, seed: u64) -> Result<TheoryReport> {
    let la = la_min_check(grid)?;
    let pab_samples = (0..=12)
        .map(|k| {
            let tau = FRAC_PI_2 * k as f64 / 12.0;
            let (c, s) = crate::schedule::cos_sin(tau);
            Ok((tau, pab_lower_bound(c, s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let monotonicity = monotonicity_grid(&Params::uniform(0.1)?, 20)?;
    let monotone = monotonicity.windows(2).all(|w| w[1] <= w[0] + 1e-12) && monotonicity.iter().all(|&r| r >= 3.0 - 1e-12);
    Ok(TheoryReport {
        la,
        pab_samples,
        monotonicity,
        monotone,
        dt2_trials: trials,
        dt2_max_residual: dt2_identity_fuzz(trials, seed),
    })
}
