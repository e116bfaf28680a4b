use thiserror::Error;

/// Errors produced by the coclustering engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("model is inconsistent with the dataset: {0}")]
    InconsistentModel(String),

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target cannot be reached: {0}")]
    Unachievable(String),

    #[error("{0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, CatsError>;
