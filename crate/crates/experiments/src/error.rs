use thiserror::Error;

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Core(#[from] rankrefine_core::Error),

    #[error(transparent)]
    Forest(#[from] rankrefine_forest::ForestError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ExperimentError::InvalidInput(msg.into()))
}
