//! Radii schedule `r_1 < R_1 < r_2 < R_2 < …` and the spiral weight functions.
//!
//! Levels and weights are indexed from 1, matching the usual way the
//! construction is written down: level `i` owns the ramp `(r_i, R_i)`, and the
//! weights are `μ_1, …, μ_{m+1}` for an `m`-level schedule. Radii are held as
//! natural logarithms because `r_i` grows like `(e^{π/(2ε)}/δ)^i`.
//!
//! Regions of the half-line, for an `m`-level schedule with `R_0 = 0` and
//! coverage `r_{m+1} = (R_m/δ)(1 + margin)`:
//!
//! * plateau `i` (1 ≤ i ≤ m+1): the closed interval `[R_{i-1}, r_i]`, where
//!   only `μ_i` is nonzero and equals 1;
//! * ramp `i` (1 ≤ i ≤ m): the open interval `(r_i, R_i)`, where
//!   `μ_i = cos τ_i` and `μ_{i+1} = sin τ_i`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-domain slack used when validating schedule inequalities that are
/// allowed to hold with equality (minimal ramp, zero margin).
const LOG_TOL: f64 = 1e-9;

/// Relative step (in `ln t`) for finite-difference derivative estimates.
pub const FD_LOG_STEP: f64 = 1e-6;

#[derive(Deserialize)]
struct ParamsRaw {
    eps: f64,
    delta: f64,
    gamma: f64,
    zeta: f64,
}

/// Construction parameters: spiral speed `eps`, radial gap `delta`, bank
/// budget `gamma`, and the selection slack `zeta`. Each lies in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRaw")]
pub struct Params {
    pub eps: f64,
    pub delta: f64,
    pub gamma: f64,
    pub zeta: f64,
}

impl TryFrom<ParamsRaw> for Params {
    type Error = Error;

    fn try_from(r: ParamsRaw) -> Result<Self> {
        Params::new(r.eps, r.delta, r.gamma, r.zeta)
    }
}

impl Params {
    pub fn new(eps: f64, delta: f64, gamma: f64, zeta: f64) -> Result<Self> {
        for (name, v) in [("eps", eps), ("delta", delta), ("gamma", gamma), ("zeta", zeta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParams(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(Params { eps, delta, gamma, zeta })
    }

    /// All four parameters equal to `s`.
    pub fn uniform(s: f64) -> Result<Self> {
        Params::new(s, s, s, s)
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Params::new(self.eps * k, self.delta * k, self.gamma * k, self.zeta * k)
    }
}

/// The radii `r_i`, `R_i` of an `m`-level schedule, in log domain.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiiSchedule {
    params: Params,
    margin: f64,
    log_r: Vec<f64>,
    log_big_r: Vec<f64>,
    log_coverage: f64,
}

/// JSON export of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleExport {
    pub levels: usize,
    pub eps: f64,
    pub delta: f64,
    pub log_r: Vec<f64>,
    #[serde(rename = "log_R")]
    pub log_big_r: Vec<f64>,
}

/// Builds the minimal-ramp schedule: `R_i = r_i·e^{π/(2ε)}` and
/// `r_{i+1} = (R_i/δ)(1 + margin)`.
pub fn build_schedule(params: Params, r1: f64, levels: usize, margin: f64) -> Result<RadiiSchedule> {
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(Error::InvalidParams(format!("r1 must be positive and finite, got {r1}")));
    }
    if levels == 0 {
        return Err(Error::InvalidParams("a schedule needs at least one level".into()));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidParams(format!("margin must be nonnegative, got {margin}")));
    }
    let ramp = FRAC_PI_2 / params.eps;
    let gap = -params.delta.ln() + margin.ln_1p();
    let mut log_r = Vec::with_capacity(levels);
    let mut log_big_r = Vec::with_capacity(levels);
    let mut lr = r1.ln();
    for _ in 0..levels {
        let lrr = lr + ramp;
        log_r.push(lr);
        log_big_r.push(lrr);
        lr = lrr + gap;
    }
    RadiiSchedule::from_logs(params, margin, log_r, log_big_r)
}

impl RadiiSchedule {
    /// Builds a schedule from explicit log-radii, validating the ordering,
    /// gap, and ramp-feasibility constraints.
    pub fn from_logs(params: Params, margin: f64, log_r: Vec<f64>, log_big_r: Vec<f64>) -> Result<Self> {
        if log_r.is_empty() || log_r.len() != log_big_r.len() {
            return Err(Error::InvalidParams("log_r and log_R must be nonempty and equally long".into()));
        }
        if log_r.iter().chain(&log_big_r).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("log radii must be finite".into()));
        }
        let min_gap = -params.delta.ln();
        for i in 0..log_r.len() {
            if log_r[i] >= log_big_r[i] {
                return Err(Error::InvalidParams(format!("r_{0} must be below R_{0}", i + 1)));
            }
            if params.eps * (log_big_r[i] - log_r[i]) < FRAC_PI_2 - LOG_TOL {
                return Err(Error::InvalidParams(format!(
                    "ramp {} too short: eps*ln(R/r) = {} < pi/2",
                    i + 1,
                    params.eps * (log_big_r[i] - log_r[i])
                )));
            }
            if i > 0 && log_r[i] - log_big_r[i - 1] < min_gap - LOG_TOL {
                return Err(Error::InvalidParams(format!("r_{} must exceed R_{}/delta", i + 1, i)));
            }
        }
        let log_coverage = log_big_r[log_big_r.len() - 1] + min_gap + margin.ln_1p();
        Ok(RadiiSchedule { params, margin, log_r, log_big_r, log_coverage })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn levels(&self) -> usize {
        self.log_r.len()
    }

    /// `ln r_i` for `1 ≤ i ≤ m + 1`; `ln r_{m+1}` is the coverage bound.
    pub fn log_r(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.levels() + 1, "level {i} out of range");
        if i == self.levels() + 1 {
            self.log_coverage
        } else {
            self.log_r[i - 1]
        }
    }

    /// `ln R_i` for `0 ≤ i ≤ m`, with `ln R_0 = -∞`.
    pub fn log_big_r(&self, i: usize) -> f64 {
        assert!(i <= self.levels(), "level {i} out of range");
        if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_big_r[i - 1]
        }
    }

    /// `ln r_{m+1}`: the largest norm the schedule covers.
    pub fn log_coverage(&self) -> f64 {
        self.log_coverage
    }

    pub fn log_r_all(&self) -> &[f64] {
        &self.log_r
    }

    pub fn log_big_r_all(&self) -> &[f64] {
        &self.log_big_r
    }

    /// Linear-domain radii `(r, R)`.
    pub fn radii(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let lin = |what: &str, i: usize, l: f64| {
            let v = l.exp();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Overflow { what: format!("{what}_{}", i + 1), log_value: l })
            }
        };
        let r = self.log_r.iter().enumerate().map(|(i, &l)| lin("r", i, l)).collect::<Result<_>>()?;
        let big = self.log_big_r.iter().enumerate().map(|(i, &l)| lin("R", i, l)).collect::<Result<_>>()?;
        Ok((r, big))
    }

    pub fn export(&self) -> ScheduleExport {
        ScheduleExport {
            levels: self.levels(),
            eps: self.params.eps,
            delta: self.params.delta,
            log_r: self.log_r.clone(),
            log_big_r: self.log_big_r.clone(),
        }
    }

    pub fn check_covered(&self, log_norm: f64) -> Result<()> {
        if log_norm > self.log_coverage || log_norm.is_nan() {
            return Err(Error::OutOfScheduleRange { log_norm, log_coverage: self.log_coverage });
        }
        Ok(())
    }

    /// Locates `ln t` among the plateaus and ramps.
    pub fn locate_log(&self, log_t: f64) -> Result<Region> {
        self.check_covered(log_t)?;
        for i in 1..=self.levels() {
            if log_t <= self.log_r[i - 1] {
                return Ok(Region::Plateau(i));
            }
            if log_t < self.log_big_r[i - 1] {
                return Ok(Region::Ramp(i));
            }
        }
        Ok(Region::Plateau(self.levels() + 1))
    }

    pub fn locate(&self, t: f64) -> Result<Region> {
        self.locate_log(log_of(t))
    }
}

/// `ln t`, with `ln 0 = -∞`.
pub(crate) fn log_of(t: f64) -> f64 {
    if t == 0.0 {
        f64::NEG_INFINITY
    } else {
        t.ln()
    }
}

/// `(cos τ, sin τ)` for a ramp angle, exact at the clamp values `0` and `π/2`.
pub fn cos_sin(tau: f64) -> (f64, f64) {
    if tau == 0.0 {
        (1.0, 0.0)
    } else if tau == FRAC_PI_2 {
        (0.0, 1.0)
    } else {
        (tau.cos(), tau.sin())
    }
}

/// Position of a norm value relative to a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "region", content = "index", rename_all = "snake_case")]
pub enum Region {
    /// `[R_{i-1}, r_i]`: the glued map coincides with the `i`-th map.
    Plateau(usize),
    /// `(r_i, R_i)`: the glued map blends maps `i` and `i+1`.
    Ramp(usize),
}

/// The weight functions `τ_i` and `μ_i` over a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSystem {
    schedule: RadiiSchedule,
}

impl WeightSystem {
    pub fn new(schedule: RadiiSchedule) -> Self {
        WeightSystem { schedule }
    }

    pub fn schedule(&self) -> &RadiiSchedule {
        &self.schedule
    }

    pub fn levels(&self) -> usize {
        self.schedule.levels()
    }

    pub fn eps(&self) -> f64 {
        self.schedule.params.eps
    }

    /// `τ_i(t) = clamp(ε·ln(t/r_i), 0, π/2)`.
    ///
    /// # Panics
    /// If `i` is not in `1..=levels`.
    pub fn tau(&self, i: usize, t: f64) -> f64 {
        self.tau_log(i, log_of(t))
    }

    pub fn tau_log(&self, i: usize, log_t: f64) -> f64 {
        assert!(i >= 1 && i <= self.levels(), "level {i} out of range");
        let (lr, lrr) = (self.schedule.log_r[i - 1], self.schedule.log_big_r[i - 1]);
        if log_t <= lr {
            0.0
        } else if log_t >= lrr {
            FRAC_PI_2
        } else {
            (self.eps() * (log_t - lr)).clamp(0.0, FRAC_PI_2)
        }
    }

    /// `(cos τ_i, sin τ_i)`, exactly `(1, 0)` and `(0, 1)` where `τ_i` is clamped.
    pub fn angle_weights_log(&self, i: usize, log_t: f64) -> (f64, f64) {
        cos_sin(self.tau_log(i, log_t))
    }

    /// `μ_j(t)` for `1 ≤ j ≤ levels + 1`.
    pub fn mu(&self, j: usize, t: f64) -> Result<f64> {
        self.mu_log(j, log_of(t))
    }

    pub fn mu_log(&self, j: usize, log_t: f64) -> Result<f64> {
        if j == 0 || j > self.levels() + 1 {
            return Err(Error::InvalidParams(format!("weight index {j} out of range")));
        }
        Ok(match self.schedule.locate_log(log_t)? {
            Region::Plateau(i) => f64::from(u8::from(i == j)),
            Region::Ramp(i) => {
                let (c, s) = self.angle_weights_log(i, log_t);
                if j == i {
                    c
                } else if j == i + 1 {
                    s
                } else {
                    0.0
                }
            }
        })
    }

    /// All weights `μ_1(t), …, μ_{m+1}(t)`.
    pub fn mu_all_log(&self, log_t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.levels() + 1];
        match self.schedule.locate_log(log_t)? {
            Region::Plateau(i) => out[i - 1] = 1.0,
            Region::Ramp(i) => {
                let (c, s) = self.angle_weights_log(i, log_t);
                out[i - 1] = c;
                out[i] = s;
            }
        }
        Ok(out)
    }

    /// Left and right difference quotients of `t·τ_i'(t)` at `t`.
    pub fn tau_one_sided_log_derivatives(&self, i: usize, log_t: f64) -> (f64, f64) {
        let h = FD_LOG_STEP;
        let mid = self.tau_log(i, log_t);
        let left = (mid - self.tau_log(i, log_t - h)) / h;
        let right = (self.tau_log(i, log_t + h) - mid) / h;
        (left, right)
    }

    /// Finite-difference audit of the derivative caps and the partition of
    /// unity on a log-spaced grid.
    pub fn check_weight_conditions(&self, samples_per_interval: usize) -> Result<WeightReport> {
        if samples_per_interval < 2 {
            return Err(Error::InvalidParams("need at least 2 samples per interval".into()));
        }
        let eps = self.eps();
        let h = FD_LOG_STEP;
        let grid = self.interval_grid(samples_per_interval);
        let mut report = WeightReport { samples: grid.len(), ..WeightReport::default() };
        for &lt in &grid {
            let weights = self.mu_all_log(lt)?;
            let sq: f64 = weights.iter().map(|w| w * w).sum();
            report.max_partition_error = report.max_partition_error.max((sq - 1.0).abs());

            let up = self.mu_all_log(lt + h)?;
            let down = self.mu_all_log(lt - h)?;
            for i in 1..=self.levels() {
                let d_tau = (self.tau_log(i, lt + h) - self.tau_log(i, lt - h)) / (2.0 * h);
                report.max_tau_violation = report.max_tau_violation.max(d_tau - eps).max(-d_tau);

                let in_ramp = lt >= self.schedule.log_r[i - 1] && lt <= self.schedule.log_big_r[i - 1];
                if in_ramp {
                    let da = (up[i - 1] - down[i - 1]) / (2.0 * h);
                    let db = (up[i] - down[i]) / (2.0 * h);
                    let speed = da.hypot(db);
                    report.max_mu_violation = report.max_mu_violation.max(speed - eps);
                    report.max_mu_speed_ratio = report.max_mu_speed_ratio.max(speed / eps);
                }
            }
        }
        Ok(report)
    }

    /// Log-spaced samples across every plateau and ramp, endpoints included,
    /// from `ln r_1 - 1` to just under the coverage bound.
    pub fn interval_grid(&self, samples_per_interval: usize) -> Vec<f64> {
        let s = &self.schedule;
        let mut knots = vec![s.log_r[0] - 1.0];
        for i in 0..s.levels() {
            knots.push(s.log_r[i]);
            knots.push(s.log_big_r[i]);
        }
        knots.push(s.log_coverage - 2.0 * FD_LOG_STEP);
        let n = samples_per_interval;
        let mut grid = Vec::with_capacity(n * (knots.len() - 1));
        for w in knots.windows(2) {
            for k in 0..n {
                let frac = k as f64 / (n - 1) as f64;
                let v = if k == n - 1 { w[1] } else { w[0] + frac * (w[1] - w[0]) };
                if grid.last() != Some(&v) {
                    grid.push(v);
                }
            }
        }
        grid
    }

    /// `(ln t, μ_1(t), …, μ_{m+1}(t))` on `n` log-spaced points from
    /// `ln r_1 - 1` to `ln r_{m+1}`.
    pub fn weights_table_log(&self, n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        if n < 2 {
            return Err(Error::InvalidParams("weights table needs at least 2 points".into()));
        }
        let lo = self.schedule.log_r[0] - 1.0;
        let hi = self.schedule.log_coverage;
        (0..n)
            .map(|k| {
                let lt = if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
                Ok((lt, self.mu_all_log(lt)?))
            })
            .collect()
    }
}

/// Worst finite-difference violations found by
/// [`WeightSystem::check_weight_conditions`]. Derivatives are measured in
/// `ln t`, i.e. `t·τ'(t)`, so the caps read `≤ ε`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WeightReport {
    pub samples: usize,
    /// `max(t·τ_i'(t) − ε, −t·τ_i'(t))` over the grid.
    pub max_tau_violation: f64,
    /// `max(t·(μ_i'² + μ_{i+1}'²)^{1/2} − ε)` over `[r_i, R_i]`.
    pub max_mu_violation: f64,
    pub max_mu_speed_ratio: f64,
    /// `max |Σ μ_j² − 1|`.
    pub max_partition_error: f64,
}
