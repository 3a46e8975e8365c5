//! Error types shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not line up for the named operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A caller-supplied value is outside its documented domain.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// NaN or infinity showed up where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image decode error: {0}")]
    Decode(String),

    #[error("history csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Checkpoint files are validated before any state is accepted; each way a
/// file can be rejected is its own variant.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic: not a MICF checkpoint")]
    BadMagic,

    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),

    #[error("malformed checkpoint header: {0}")]
    Header(String),

    #[error("truncated blob `{name}`: expected {expected} bytes, got {got}")]
    Truncated {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("blob `{name}` disagrees with the architecture: expected {expected} elements, found {found}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
