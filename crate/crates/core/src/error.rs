use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for the given curve family.
    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    /// No exact oracle exists for the instance's curve mix.
    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),

    /// The requested enumeration exceeds a hard size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed or inconsistent configuration (dimension mismatch, bad field).
    #[error("configuration error: {0}")]
    Config(String),

    /// A value handed between components violates its documented contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The instance violates the diminishing-returns assumption
    /// (non-zero means, concave power curves).
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// Least-squares fit precondition failed.
    #[error("fit error: {0}")]
    Fit(String),

    /// The exact optimum was beaten by a played allocation.
    #[error("oracle suboptimal: {0}")]
    OracleSuboptimal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
