use rankrefine_core::ErrorKind;
use rankrefine_experiments::ExperimentError;
use rankrefine_forest::ForestError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] rankrefine_core::Error),

    #[error(transparent)]
    Forest(#[from] ForestError),

    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn core_code(e: &rankrefine_core::Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
        ErrorKind::Network => 5,
    }
}

fn forest_code(e: &ForestError) -> i32 {
    match e {
        ForestError::InvalidConfig(_) => 2,
        ForestError::Core(c) => core_code(c),
        _ => 3,
    }
}

impl CliError {
    /// 2 usage/validation, 3 data, 4 numeric, 5 network.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => core_code(e),
            CliError::Forest(e) => forest_code(e),
            CliError::Experiment(e) => match e {
                ExperimentError::InvalidInput(_) => 2,
                ExperimentError::Core(c) => core_code(c),
                ExperimentError::Forest(f) => forest_code(f),
                ExperimentError::Csv(_) => 3,
            },
        }
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}
