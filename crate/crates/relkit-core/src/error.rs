//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch between two tensors or layers.
    #[error("shape error in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: String,
        got: String,
    },

    /// An index outside the valid range.
    #[error("index error: {what} = {got}, valid range {range}")]
    Index {
        what: String,
        got: String,
        range: String,
    },

    /// Invalid configuration (bad key, bad value, failed divisibility, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric argument outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// CTC target cannot be aligned to the frame sequence (loss would be +inf).
    #[error("infeasible alignment: target needs {needed} frames, only {frames} available")]
    InfeasibleAlignment { needed: usize, frames: usize },

    /// Error rate over an empty reference corpus.
    #[error("undefined rate: total reference length is zero")]
    UndefinedRate,

    /// Unsupported or malformed input data format.
    #[error("format error: {0}")]
    Format(String),

    /// Training aborted on a non-finite loss.
    #[error(
        "training diverged at epoch {epoch}, utterance {utterance}: \
         ctc = {ctc}, kl = {kl}"
    )]
    Diverged {
        epoch: usize,
        utterance: usize,
        ctc: f64,
        kl: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn shape(context: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
