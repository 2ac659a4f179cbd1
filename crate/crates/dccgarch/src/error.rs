//! Crate-wide error type.

/// Errors reported by the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A computation left its numerical domain (non-PD matrix, variance
    /// underflow, zero-variance series, ...).
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    /// File-system or parsing failure, tagged with the pipeline stage.
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::NumericalDomain(msg.into())
    }

    pub fn stage(stage: &'static str, msg: impl std::fmt::Display) -> Self {
        Error::Stage {
            stage,
            message: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
