use thiserror::Error;

/// Failure of one stage of a lab run. The stage decides the process exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver error: {0}")]
    Solver(gavg_core::Error),
    #[error("averaging error: {0}")]
    Averaging(gavg_core::Error),
    #[error("verdict: {0}")]
    Verdict(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Validation(_) => 3,
            LabError::Solver(_) => 4,
            LabError::Averaging(_) => 5,
            LabError::Verdict(_) => 6,
            LabError::Io(_) | LabError::Csv(_) | LabError::Json(_) => 1,
        }
    }
}

impl From<gavg_core::Error> for LabError {
    fn from(e: gavg_core::Error) -> Self {
        match e {
            gavg_core::Error::AveragingFailure { .. } => LabError::Averaging(e),
            gavg_core::Error::InvalidSpec(msg) => LabError::Config(msg),
            other => LabError::Solver(other),
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
