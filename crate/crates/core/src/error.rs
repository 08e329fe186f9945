use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the explanation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("histogram has {populated} populated bins, need at least {classes}")]
    DegenerateHistogram { populated: usize, classes: usize },

    #[error("score given for unknown segment id {0}")]
    UnknownSegmentId(u32),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("subprocess classifier failed: {0}")]
    SubprocessFailure(String),

    #[error("training data contains a single class")]
    SingleClassTraining,

    #[error("planted regions {0} and {1} overlap")]
    OverlappingRegions(usize, usize),

    #[error("segmentation produced no segments")]
    NoSegmentsFound,

    #[error("perturbation vector has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("minimality check for {0:?} needs a record that was not evaluated")]
    IncompleteEnumeration(Vec<u32>),

    #[error("image is not in the positive class (p = {0:.4})")]
    NotPositiveClass(f64),

    #[error("pointing game needs at least one target")]
    EmptyTargets,

    #[error("saliency map has no positive value")]
    ZeroSaliency,

    #[error("need at least {needed} scores, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error("json error: {0}")]
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
}
