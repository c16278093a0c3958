use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolated {
        assumption: &'static str,
        detail: String,
    },

    #[error("zero distance between BS {bs} and UE {ue} of cell {cell}")]
    ZeroDistance { bs: usize, cell: usize, ue: usize },

    #[error("matrix is not Hermitian positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("singular linear system ({0})")]
    Singular(String),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precoding column {column} has zero expected norm")]
    ZeroNormColumn { column: usize },

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("engine `{engine}` is not applicable: {reason}")]
    Inapplicable { engine: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
