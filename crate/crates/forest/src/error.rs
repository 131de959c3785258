use thiserror::Error;

pub type Result<T, E = ForestError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),

    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] rankrefine_core::Error),
}
