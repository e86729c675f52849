use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands (or an operand and an operator) disagree on shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A coordinate or band index lies outside its valid range.
    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// A scalar parameter violates its domain (nonpositive radius, bad rate, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A file did not match the expected binary format.
    #[error("malformed file: {0}")]
    MalformedFile(String),

    /// Configuration text failed to parse or validate.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The iterative solver produced non-finite values.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
