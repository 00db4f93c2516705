use std::io;

use thiserror::Error;

pub type Result<T, E = DinerError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DinerError {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("index {value} out of range on axis {axis} (extent {extent})")]
    Index {
        axis: usize,
        value: usize,
        extent: usize,
    },

    #[error("non-finite value in {context}")]
    Numeric { context: String },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("model is bound to {expected} elements but the signal has {actual}")]
    Binding { expected: usize, actual: usize },

    #[error("signal has no elements")]
    EmptySignal,

    #[error("unsupported format: {message} (header bytes {header:02x?})")]
    Format { message: String, header: Vec<u8> },

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DinerError {
    pub(crate) fn dims(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        DinerError::Dimension {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn format(message: impl Into<String>, header: &[u8]) -> Self {
        DinerError::Format {
            message: message.into(),
            header: header.iter().copied().take(16).collect(),
        }
    }
}
