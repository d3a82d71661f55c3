use thiserror::Error;

/// Errors reported by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoglapError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point is outside the admissible region: {0}")]
    OutsideDomain(String),
    #[error("point is too close to a singular set: {0}")]
    Singular(String),
    #[error("did not converge: {0}")]
    NotConverged(String),
    #[error("matrix is singular or indefinite: {0}")]
    SingularMatrix(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, LoglapError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LoglapError::InvalidArgument(msg.into()))
}
