//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("storage io: {0}")]
    StorageIo(#[from] std::io::Error),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("malformed url `{url}`: {reason}")]
    MalformedUrl { url: String, reason: String },

    #[error("malformed record: {0}")]
    MalformedRecord(#[from] serde_json::Error),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient support for label `{label}`: {count} < {required}")]
    InsufficientLabelSupport {
        label: String,
        count: usize,
        required: usize,
    },

    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error("empty store: {0}")]
    EmptyStore(String),

    #[error("model: {0}")]
    Model(String),

    #[error("adapter `{adapter}`: {reason}")]
    Adapter { adapter: String, reason: String },

    #[error("fetch `{url}`: {reason}")]
    Fetch { url: String, reason: String },

    #[error("transport: {0}")]
    Transport(String),

    #[error("unknown handle `{0}`")]
    UnknownHandle(String),

    #[error("missing counterpart snapshot for `{website}` at vantage `{vantage}`")]
    MissingCounterpart { website: String, vantage: String },

    #[error("unreadable ranking file `{path}`: {reason}")]
    UnreadableRanking { path: String, reason: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }

    pub fn malformed_url(url: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MalformedUrl {
            url: url.into(),
            reason: reason.into(),
        }
    }
}
