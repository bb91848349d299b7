use dotbench_core::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] dotbench_core::Error),
    #[error("property check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// 0 ok, 1 other, 2 config, 3 non-convergence, 4 capacity, 5 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::CheckFailed(_) => 5,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::NonConvergence => 3,
                ErrorClass::Capacity => 4,
                ErrorClass::Other => 1,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
