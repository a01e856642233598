use autodiff::TensorError;
use rpm::RpmError;
use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Data(#[from] RpmError),

    #[error("config: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("non-finite training state at step {step} (lr {lr:e}, grad norm {grad_norm:e}): {detail}")]
    NonFinite { step: u64, lr: f64, grad_norm: f64, detail: String },
}

impl CoreError {
    /// Whether the failure is numeric (non-finite values) rather than a
    /// configuration or data problem.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            CoreError::NonFinite { .. }
                | CoreError::Tensor(TensorError::NonFinite { .. })
                | CoreError::Tensor(TensorError::GradCheck { .. })
        )
    }

    pub fn is_data(&self) -> bool {
        matches!(self, CoreError::Data(_) | CoreError::Dataset(_))
    }
}
