use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid document {id:?}: {reason}")]
    InvalidDocument { id: String, reason: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("unknown passage {0:?}")]
    UnknownPassage(String),

    #[error("citation anchor {anchor:?} at byte {offset}: document {doc_id:?} has no reference {ordinal}")]
    UnknownAnchor {
        anchor: String,
        offset: usize,
        doc_id: String,
        ordinal: u32,
    },

    #[error("reference ordinal {ordinal} out of range for {doc_id:?} ({count} references)")]
    OrdinalOutOfRange {
        doc_id: String,
        ordinal: u32,
        count: usize,
    },

    #[error("malformed reference marker {marker:?} at position {position}: {reason}")]
    MarkerParse {
        marker: String,
        position: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model fingerprint mismatch: index built by {index}, model is {model}")]
    FingerprintMismatch { index: String, model: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad file format in {path:?}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path:?} line {line}: {source}")]
    Jsonl {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("service error: {0}")]
    Service(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag for the error variant, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDocument { .. } => "invalid_document",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownDocument(_) => "unknown_document",
            Error::UnknownPassage(_) => "unknown_passage",
            Error::UnknownAnchor { .. } => "unknown_anchor",
            Error::OrdinalOutOfRange { .. } => "ordinal_out_of_range",
            Error::MarkerParse { .. } => "marker_parse",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
            Error::Config(_) => "config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Format { .. } => "format",
            Error::Jsonl { .. } | Error::Json(_) => "json",
            Error::Io { .. } => "io",
            Error::Service(_) => "service",
        }
    }
}
