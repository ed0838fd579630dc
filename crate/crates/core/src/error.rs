use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path} is not valid UTF-8: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: std::string::FromUtf8Error,
    },

    /// A malformed record in a line-oriented file.
    #[error("{file}:{line}: {message}")]
    Record {
        file: String,
        line: usize,
        message: String,
    },

    #[error("span {begin}..{end} is invalid for a text of {len} code points")]
    SpanOutOfBounds { begin: usize, end: usize, len: usize },

    #[error("invalid layer bundle: {0}")]
    Layer(String),

    #[error("invalid rule set: {0}")]
    Rules(String),

    #[error("unknown motif id `{0}`")]
    UnknownMotif(String),

    #[error("feature extraction failed: {0}")]
    Feature(String),

    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("training failed: {0}")]
    Train(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("evaluation failed: {0}")]
    Eval(String),

    #[error("degenerate agreement table: all ratings fall into a single category")]
    DegenerateAgreement,

    #[error("invalid agreement table: {0}")]
    Agreement(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing upstream artifact {}", path.display())]
    MissingArtifact { path: PathBuf },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
