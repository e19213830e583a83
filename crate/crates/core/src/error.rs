use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the engine.
///
/// Variants are grouped so that drivers can map them onto distinct exit
/// codes: see [`RalmError::category`].
#[derive(Debug, Error)]
pub enum RalmError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("corrupt data: {0}")]
    Corruption(String),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("context overflow: {needed} tokens exceed the window of {window}")]
    ContextOverflow { needed: usize, window: usize },

    #[error("passage of {passage_tokens} tokens plus {continuation_tokens} continuation tokens does not fit a window of {window}; lower max_passage_tokens")]
    PassageTooLong {
        passage_tokens: usize,
        continuation_tokens: usize,
        window: usize,
    },

    #[error("backend error: {0}")]
    Backend(String),

    #[error("stride {stride}: {source}")]
    AtStride {
        stride: usize,
        #[source]
        source: Box<RalmError>,
    },

    #[error("feature spec mismatch: model uses {model}, extractor provides {extractor}")]
    FeatureSpecMismatch { model: String, extractor: String },

    #[error(
        "training diverged at step {step}: loss rose for {streak} consecutive steps (last {loss})"
    )]
    Divergence {
        step: usize,
        streak: usize,
        loss: f64,
    },

    #[error("rejected training example: {0}")]
    RejectedExample(String),
}

/// Coarse classification used for exit codes and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Backend,
}

impl RalmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RalmError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_stride(stride: usize, source: RalmError) -> Self {
        RalmError::AtStride {
            stride,
            source: Box::new(source),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            RalmError::InvalidArgument(_) => ErrorCategory::Usage,
            RalmError::Backend(_) | RalmError::ContextOverflow { .. } => ErrorCategory::Backend,
            RalmError::AtStride { source, .. } => source.category(),
            _ => ErrorCategory::Data,
        }
    }
}

pub type Result<T, E = RalmError> = std::result::Result<T, E>;
