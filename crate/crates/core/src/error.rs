use thiserror::Error;

use crate::partial::BuildTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("vertex {0} is not part of the tree")]
    UnknownVertex(usize),

    #[error("repeated vertex in triplet ({0}, {1}, {2})")]
    RepeatedVertex(usize, usize, usize),

    #[error("graph has {size} vertices, exact enumeration is limited to {limit}")]
    TooLarge { size: usize, limit: usize },

    /// The construction hit one of its abort rules. The trace up to the
    /// failure point is attached.
    #[error("construction failed: {reason}")]
    Fail {
        reason: String,
        trace: Box<BuildTrace>,
    },

    #[error("stream error: {0}")]
    Stream(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
