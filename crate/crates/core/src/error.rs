use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate distribution: column {column} has zero mass")]
    DegenerateColumn { column: usize },

    #[error("policy space of {requested} sequences exceeds the cap of {cap}")]
    Capacity { requested: u128, cap: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("trial complete: all {0} steps have been played")]
    TrialComplete(usize),

    #[error("model failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
