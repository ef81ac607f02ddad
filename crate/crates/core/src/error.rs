use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the segmentation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid shape for {op}: {shape:?} ({reason})")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("bad magic in {path}: expected {expected}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: &'static str,
        found: String,
    },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unsupported maxval {maxval} in {path} (only 255 is supported)")]
    UnsupportedMaxval { path: PathBuf, maxval: u32 },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("dimension mismatch between {image} ({image_dims:?}) and {label} ({label_dims:?})")]
    DimMismatch {
        image: PathBuf,
        label: PathBuf,
        image_dims: (usize, usize),
        label_dims: (usize, usize),
    },

    #[error("label {value} in {path} is outside the class alphabet [0, {num_classes})")]
    LabelOutOfRange {
        path: PathBuf,
        value: u8,
        num_classes: usize,
    },

    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("configuration error for key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
