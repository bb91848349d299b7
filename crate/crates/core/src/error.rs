use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: String,
        requested: usize,
        limit: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("iteration limit reached after {iterations} iterations (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("at level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure class, used by front ends to map errors onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    NonConvergence,
    Capacity,
    Other,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::Domain(_)
            | Error::DimensionMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::Unsupported(_)
            | Error::Validation(_) => ErrorClass::Config,
            Error::IterationLimit { .. } | Error::Numeric(_) => ErrorClass::NonConvergence,
            Error::Capacity { .. } => ErrorClass::Capacity,
            Error::AtLevel { source, .. } => source.class(),
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
