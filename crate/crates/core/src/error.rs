use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the valid domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Coinciding keypoints or similarly degenerate geometry.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Not enough independent constraints to determine a solution.
    #[error("underdetermined: {0}")]
    Underdetermined(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A class with no positive labels has no defined average precision.
    #[error("class {0} has no positive labels")]
    UndefinedClass(usize),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
