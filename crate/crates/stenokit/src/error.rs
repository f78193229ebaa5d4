//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    /// The polygon has zero area (all vertices collinear); rasterizing it
    /// would always yield an empty mask.
    #[error("degenerate polygon: all vertices are collinear")]
    DegeneratePolygon,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class index {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),

    #[error("invalid RoI: {0}")]
    InvalidRoi(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A mask-based operation was requested on a detection without a mask.
    #[error("missing mask on detection for image {image_id}")]
    MissingMask { image_id: u64 },

    #[error("split sizes sum to {given} but the dataset has {expected} images")]
    SizeMismatch { given: usize, expected: usize },

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    /// Validation collects every violation before failing, so batch jobs
    /// surface all problems in one run.
    #[error("validation failed with {} issue(s):\n  {}", .0.len(), .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code contract: 2 for parse/validation/input problems,
    /// 1 for internal errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::MissingMask { .. }
            | Error::SizeMismatch { .. }
            | Error::InvalidConfig(_)
            | Error::InvalidBox(_)
            | Error::InvalidPolygon(_)
            | Error::DegeneratePolygon
            | Error::InvalidMask(_)
            | Error::Io(_) => 2,
            Error::ShapeMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::EmptyBatch(_)
            | Error::InvalidRoi(_) => 1,
        }
    }
}
