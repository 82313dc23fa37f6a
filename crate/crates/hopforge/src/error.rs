//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulator, optimizer, and harness operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (nonpositive distance,
    /// zero matrix dimension, out-of-range hyperparameter, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input that is formally valid but has no usable content, such as an
    /// all-zero precoder block handed to the power normalizer. Callers are
    /// expected to substitute a fresh input.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The stacked direct-channel matrix is rank deficient; zero-forcing has
    /// no solution.
    #[error("singular channel: {0}")]
    SingularChannel(String),

    /// The requested operation does not apply to this scenario (e.g.
    /// alternating optimization on a multi-hop chain).
    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    /// Training produced a non-finite quantity; the message carries the
    /// diagnostic state dump.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Configuration file or override problem, with a field-level message.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
