use alloc::string::String;
use alloc::vec::Vec;

use crate::tensor::Shape;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Shape, actual: Shape },

    #[error("buffer of length {len} does not fit shape {shape:?}")]
    BadLength { shape: Shape, len: usize },

    #[error("{0} requires a square image, got {1}x{2}")]
    NonSquare(&'static str, usize, usize),

    #[error("transform pool is empty")]
    EmptyPool,

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} images, got {got}")]
    TooFewImages { needed: usize, got: usize },

    #[error("degenerate distance statistics: sigma = {0}")]
    DegenerateSigma(f64),

    #[error("epoch {epoch} outside schedule of {total} epochs")]
    EpochOutOfRange { epoch: usize, total: usize },

    #[error("non-finite {term} loss on batch {indices:?}")]
    NonFinite { term: &'static str, indices: Vec<usize> },

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("label {label} outside {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },

    #[error("palette: {0}")]
    Palette(String),

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },
}
