//! Error types shared across the toolkit.

use thiserror::Error;

/// Unified error type for constructing measures, rules, operators and running solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A point where an operation is undefined (e.g. the kernel singularity at 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// Expression parsing failed. `offset` is a byte offset into the source text.
    #[error("parse error at byte {offset}: {message} (expected one of: {expected})")]
    Parse {
        offset: usize,
        message: String,
        expected: String,
    },

    /// Expression evaluation failed (division by zero, 0^negative, ...).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// The rescaling bound of the density family could not be verified.
    #[error("rescaling condition failed: {0}")]
    RescalingFailed(String),

    /// Diagnostic estimation (e.g. the singularity exponent) had no usable data.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A quadrature rule would contain no nodes.
    #[error("empty quadrature rule: {0}")]
    EmptyRule(String),

    /// An assembled operator violated one of its structural invariants.
    #[error("operator consistency error: {0}")]
    OperatorConsistency(String),

    /// A linear or fixed-point solver did not converge.
    #[error("solver error: {0}")]
    Solver(String),

    /// The vanishing-discount limit does not settle; usually a controllability failure.
    #[error("ergodicity failure: {0}")]
    ErgodicityFailure(String),

    /// Shape mismatch between an operator and a field.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The effective-operator table does not cover a requested range.
    #[error("tabulated range exceeded: {0}")]
    RangeEscape(String),

    /// I/O while reading configs or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a config file.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
