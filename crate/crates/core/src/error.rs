use thiserror::Error;

/// Failure modes shared by every module of the workbench.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A dense object would exceed the configured dimension cap.
    #[error("dimension {dim} exceeds the capacity limit {cap}")]
    Capacity { dim: usize, cap: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
