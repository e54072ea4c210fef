use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the indexing and retrieval pipeline.
///
/// Provider misbehavior that has a documented fail-safe (e.g. unparseable
/// entity lists) is *not* reported here; those paths degrade as specified and
/// log instead. `Error` is reserved for conditions the caller must handle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A corpus or dataset file violated its line-delimited format.
    #[error("{path}:{line}: {msg}")]
    CorpusFormat {
        path: String,
        line: usize,
        msg: String,
    },

    /// A caller-supplied argument was out of range or structurally invalid.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The chat provider failed or kept returning unusable output.
    #[error("provider error: {msg}")]
    Provider {
        msg: String,
        /// Last raw response, when one was received.
        raw: Option<String>,
    },

    /// Embedding-layer failure: dimension mismatch, degenerate vector, etc.
    #[error("embedding error: {0}")]
    Embedding(String),

    /// Knowledge-graph construction or lookup failure.
    #[error("graph error: {0}")]
    Graph(String),

    /// A persisted artifact could not be read back (corruption, wrong magic,
    /// unsupported version).
    #[error("persistence error in {path}: {msg}")]
    Persistence { path: String, msg: String },
}

impl Error {
    pub(crate) fn provider(msg: impl Into<String>, raw: Option<String>) -> Self {
        Error::Provider {
            msg: msg.into(),
            raw,
        }
    }
}
