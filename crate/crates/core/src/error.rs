use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("query radius {radius} exceeds grid cell size {cell_size}; rebuild the grid")]
    RadiusExceedsCell { radius: f64, cell_size: f64 },

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("degenerate tangent fit at {} point(s): {indices:?}", indices.len())]
    DegenerateNeighborhoods { indices: Vec<usize> },

    #[error("intrinsic dimension {0} is not supported by this estimator")]
    UnsupportedDimension(usize),

    #[error("point is outside kernel reach (no sample within the support radius)")]
    OutOfReach,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
