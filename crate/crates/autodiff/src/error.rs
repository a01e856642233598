use thiserror::Error;

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch { op: &'static str, left: Vec<usize>, right: Vec<usize> },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("{op}: produced a non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("unknown variable {0} (graph was cleared or the handle belongs to another graph)")]
    UnknownVar(usize),

    #[error("parameter {0:?} already exists")]
    DuplicateParam(String),

    #[error("parameter {0:?} not found")]
    MissingParam(String),

    #[error(
        "gradient check failed for input {input} at flat index {index}: \
         analytic {analytic:e}, numeric {numeric:e}, relative error {rel_error:e} > {tol:e}"
    )]
    GradCheck { input: usize, index: usize, analytic: f64, numeric: f64, rel_error: f64, tol: f64 },

    #[error("checkpoint: {msg} (at byte offset {offset})")]
    Checkpoint { msg: String, offset: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TensorError {
    pub fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        TensorError::InvalidArgument { op, msg: msg.into() }
    }

    pub fn shapes(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        TensorError::ShapeMismatch { op, left: left.to_vec(), right: right.to_vec() }
    }
}
