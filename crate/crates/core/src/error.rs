use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("radius e^{log_value:.3} for {what} exceeds the f64 range")]
    Overflow { what: String, log_value: f64 },

    #[error("norm e^{log_norm:.6} lies beyond the schedule coverage e^{log_coverage:.6}")]
    OutOfScheduleRange { log_norm: f64, log_coverage: f64 },

    #[error("map {map} failed certification: ratio {ratio} on vector {vector:?} (allowed [1, {upper}])")]
    CertificationFailed {
        map: usize,
        vector: Vec<f64>,
        ratio: f64,
        upper: f64,
    },

    #[error("spreading estimate did not stabilize: best oscillation {oscillation:e} > tol {tol:e}")]
    NotStabilized { oscillation: f64, tol: f64 },

    #[error(
        "bank exhausted at level {level}: |cos(t)*A u + sin(t)*B u| = {achieved} < {threshold} \
         for t = {tau}, u = {direction:?}"
    )]
    BankExhausted {
        level: usize,
        direction: Vec<f64>,
        tau: f64,
        achieved: f64,
        threshold: f64,
    },

    #[error("lower bound {which} = {value} is not positive; parameters are too large")]
    NonPositiveLowerBound { which: &'static str, value: f64 },

    #[error("{inequality} violated for pair ({x_id}, {y_id}): slack {slack:e}")]
    BoundViolated {
        inequality: String,
        slack: f64,
        x_id: usize,
        y_id: usize,
    },

    #[error("coefficients c and s are both zero")]
    BothZero,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
