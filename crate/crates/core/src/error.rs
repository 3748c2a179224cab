use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the exit code the CLI maps them to: configuration
/// problems, data problems, and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    // --- configuration ---
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("zero-sized resize target {0}x{1}")]
    ZeroSizedTarget(usize, usize),
    #[error("spatial size {h}x{w} is not divisible by 2^{depth}")]
    IndivisibleSpatialDim { h: usize, w: usize, depth: usize },
    #[error("split counts {counts:?} do not sum to {available} entries")]
    CountMismatch { counts: (usize, usize, usize), available: usize },
    #[error("filter bank is empty")]
    EmptyBank,

    // --- data ---
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image {0} has zero width or height")]
    ZeroSizedImage(PathBuf),
    #[error("cannot write {path}: {reason}")]
    WriteFailure { path: PathBuf, reason: String },
    #[error("image is empty")]
    EmptyImage,
    #[error("image/mask dimensions differ: image {image:?} vs mask {mask:?}")]
    PairDimensionMismatch { image: (usize, usize), mask: (usize, usize) },
    #[error("mask dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("dataset at {0} contains no images")]
    DatasetEmpty(PathBuf),
    #[error("{images} images but {masks} masks")]
    PairMismatch { images: usize, masks: usize },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint tensor {name} has shape {found:?}, config implies {expected:?}")]
    ShapeHeaderMismatch { name: String, expected: [usize; 4], found: [usize; 4] },
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("confusion counts are all zero")]
    EmptyConfusion,
    #[error("no report rows")]
    NoRows,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    // --- numeric / shape ---
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("spatial mismatch: {0:?} vs {1:?}")]
    SpatialMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("max-pool needs even spatial dims, got {0}x{1}")]
    OddSpatialDim(usize, usize),
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),
    #[error("backward called without a forward cache")]
    MissingCache,
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("dice loss is zero; efficacy ratio undefined")]
    ZeroDiceLoss,
}

impl Error {
    /// Process exit code: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            ConfigInvalid(_)
            | ZeroSizedTarget(..)
            | IndivisibleSpatialDim { .. }
            | CountMismatch { .. }
            | EmptyBank => 2,
            NonFiniteLoss { .. } | NonFiniteValue(_) | ZeroDiceLoss => 4,
            ShapeMismatch(_) | SpatialMismatch(..) | OddSpatialDim(..) | MissingCache => 4,
            _ => 3,
        }
    }
}
