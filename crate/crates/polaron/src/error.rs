use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum PolaronError {
    /// Grid construction rejected the requested size or extent.
    #[error("grid sizing: {0}")]
    Sizing(String),
    /// Two fields or a field and an operator live on incompatible grids.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A documented operation precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An iterative solver stopped at its iteration cap.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    /// A requested operator exceeds the configured size limit.
    #[error("dimension limit exceeded: {0}")]
    DimensionLimit(String),
}

pub type Result<T> = std::result::Result<T, PolaronError>;
