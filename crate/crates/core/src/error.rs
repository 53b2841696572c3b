use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum HanError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("degenerate mask: every position is masked")]
    DegenerateMask,

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,

    #[error("backward root must be a 1x1 scalar, got {0}x{1}")]
    NonScalarRoot(usize, usize),

    #[error("node does not belong to this tape")]
    DetachedNode,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("user {0} has no usable tweets")]
    EmptyUser(String),

    #[error("invalid label {0}, expected 0 or 1")]
    InvalidLabel(i64),

    #[error("parse error at line {line} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed lexicon entry at line {line}: {message}")]
    MalformedLexicon { line: usize, message: String },

    #[error("malformed taxonomy at line {line}: {message}")]
    MalformedTaxonomy { line: usize, message: String },

    #[error("unknown word {lemma:?} ({pos})")]
    UnknownWord { lemma: String, pos: String },

    #[error("no paraphrase candidates for {0:?}")]
    NoParaphrase(String),

    #[error("curve has no knee")]
    NoKnee,

    #[error("concept labels must be non-empty")]
    EmptyConcept,

    #[error("too few users per class: {0}")]
    TooFewUsers(String),

    #[error("non-finite gradient for parameter {0}")]
    NanGradient(String),

    #[error("training diverged at step {0}")]
    Divergence(usize),

    #[error("unknown encoder kind {0:?}")]
    UnknownEncoderKind(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("model/dataset mismatch: {0}")]
    Incompatible(String),
}

impl HanError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HanError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HanError>;
