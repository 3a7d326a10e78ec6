use thiserror::Error;

use crate::universe::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("all betas are zero; the market direction is undefined")]
    AllBetasZero,

    #[error("betas are (nearly) uniform: tan(theta) = {tan_theta:e} is below {threshold:e}")]
    UniformBetas { tan_theta: f64, threshold: f64 },

    #[error("residual variance must be positive, got {0}")]
    NonPositiveResidualVar(f64),

    #[error("secular root in interval {interval} did not converge within {iterations} iterations")]
    ConvergenceFailure { interval: usize, iterations: usize },

    #[error("no principal portfolio has an expected return distinct from the riskless rate")]
    Unreachable,

    #[error("degenerate allocation: {0}")]
    Degenerate(String),

    #[error("no riskless asset configured")]
    NoRisklessAsset,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a {expected} decomposition")]
    WrongMethod { expected: &'static str },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("universe failed validation: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit code used by the `pp` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            Error::Parse { .. } | Error::Io(_) | Error::Json(_) | Error::InvalidArgument(_) => 2,
            _ => 3,
        }
    }
}
