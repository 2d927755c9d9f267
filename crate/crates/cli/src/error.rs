use heatlab::HeatError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} asserted check(s) failed")]
    Assertion { failed: usize },
}

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const PRECONDITION: i32 = 3;
    pub const NUMERICAL_ABORT: i32 = 4;
    pub const ASSERTION: i32 = 5;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Heat(e) => match e {
                HeatError::InvalidParameter(_) | HeatError::Json(_) => exit::CONFIG,
                HeatError::Precondition(_) | HeatError::NotDoubling { .. } | HeatError::FitRefused(_) => {
                    exit::PRECONDITION
                }
                HeatError::NumericalAbort(_) | HeatError::Solver(_) => exit::NUMERICAL_ABORT,
                HeatError::Io(_) => exit::OTHER,
            },
            CliError::Io(_) => exit::OTHER,
            CliError::Assertion { .. } => exit::ASSERTION,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
