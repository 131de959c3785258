use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied argument outside its valid range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("size error: {0}")]
    Size(String),

    #[error("ratio undefined: denominator is zero")]
    UndefinedRatio,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("duplicate comparison ({query}, {reference})")]
    DuplicatePair { query: String, reference: String },

    #[error("tied ground truth for pair ({query}, {reference})")]
    Tie { query: String, reference: String },

    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: String },

    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Empty(_) | Error::LengthMismatch { .. } => ErrorKind::Usage,
            Error::Size(_)
            | Error::UnknownId(_)
            | Error::DuplicateId(_)
            | Error::DuplicatePair { .. }
            | Error::Tie { .. }
            | Error::MissingColumn { .. }
            | Error::Parse { .. }
            | Error::Csv(_)
            | Error::Io { .. }
            | Error::NonFinite(_) => ErrorKind::Data,
            Error::UndefinedRatio | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Transport(_) | Error::Auth(_) | Error::MalformedResponse(_) => ErrorKind::Network,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
    Network,
}
