use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatError {
    /// An argument is outside the domain of the operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The run left its trustworthy regime (boundary leakage, noise floor).
    #[error("numerical abort: {0}")]
    NumericalAbort(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("space is not doubling on the sampled range: C = {constant} exceeds ceiling {ceiling}")]
    NotDoubling { constant: f64, ceiling: f64 },
    #[error("fit refused: {0}")]
    FitRefused(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HeatError> = std::result::Result<T, E>;
