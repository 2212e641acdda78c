use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    /// Malformed STT payload; `offset` is the byte position where decoding stopped.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene spec: {0}")]
    Spec(String),

    #[error("ring has {views} view(s); bilateral scoring needs at least 2 unless degenerate mode is enabled")]
    DegenerateRing { views: usize },

    #[error("instance exceeds oracle scale (n={n}, k={k}; caps n<={max_n}, k<={max_k})")]
    OracleScale {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("malformed document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 3 for I/O failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
