use thiserror::Error;

/// Errors surfaced by trace ingestion, model fitting, and the prediction loop.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: missing column {0:?}")]
    Schema(String),

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty class: {0}")]
    EmptyClass(String),

    #[error("warm-up impossible for job {job_id}: {reason}")]
    WarmupImpossible { job_id: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
