use thiserror::Error;

/// Errors raised by the analysis pipeline.
///
/// `Validation` covers bad inputs and unsatisfied preconditions; `Numerical`
/// covers algorithms that ran but failed to meet their own tolerances.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight: {0}")]
    Weight(String),
    #[error("scale plan: {0}")]
    Plan(String),
    #[error("wavelet: {0}")]
    Wavelet(String),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("not power-type: {0}")]
    NotPowerType(String),
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for internal numerical failures, 1 for everything
    /// the caller can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
