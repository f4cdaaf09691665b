use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PapcError {
    /// Mismatched vector or matrix shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Input outside the domain where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Failure inside a Monte-Carlo trial, tagged with where it happened.
    #[error("trial {trial}, method {method}: {source}")]
    Trial {
        trial: u64,
        method: String,
        #[source]
        source: Box<PapcError>,
    },
}

pub type Result<T, E = PapcError> = std::result::Result<T, E>;
