//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (dimension mismatch,
    /// malformed block offsets, non-triangular input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A linear system with an exactly singular diagonal block was met.
    /// The caller is expected to desingularize first.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// An internal residual guard fired. This indicates a loss of the
    /// structure the algorithm relies on and aborts the run.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Matrix Market parse error with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
