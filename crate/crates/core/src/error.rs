use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate story id `{0}`")]
    DuplicateStory(String),

    #[error("bracket parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    Dimension {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("clause `{0}` has no gold label; run aggregation first")]
    MissingGold(String),

    #[error("clause `{0}` has no POS tags")]
    MissingPos(String),

    #[error("aspect {aspect} is undefined for story `{story}`")]
    UndefinedAspect { story: String, aspect: String },

    #[error("no eligible candidates: {0}")]
    NoCandidates(String),

    #[error("checkpoint integrity: {0}")]
    Integrity(String),

    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
