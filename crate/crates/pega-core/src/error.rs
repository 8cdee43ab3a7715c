//! Crate-wide error type. Variants map one-to-one onto the failure modes the
//! pipeline can report; file errors carry the offset of the first invalid
//! byte so tooling can point at it.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {op} got {left:?} vs {right:?}")]
    ShapeError {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("mask selects no entries")]
    EmptyMask,

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("missing gradient for parameter '{0}'")]
    MissingGradient(String),

    #[error("shape has no occupied voxels")]
    EmptyShape,

    #[error("incompatible recipe: {0}")]
    IncompatibleRecipe(String),

    #[error("unknown token '{0}'")]
    UnknownToken(String),

    #[error("training diverged (non-finite loss) at step {step}")]
    TrainingDiverged { step: usize },

    #[error("sampling diverged (non-finite state) at step {step}")]
    SamplingDiverged { step: usize },

    #[error("incompatible stage: expected {expected}, got {actual}")]
    IncompatibleStage {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("generated geometry is empty")]
    EmptyGeometry,

    #[error("corrupt {format} data at byte {offset}: {message}")]
    CorruptFile {
        format: &'static str,
        offset: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
