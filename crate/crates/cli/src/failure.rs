use autodiff::TensorError;
use cpcnet::CoreError;
use rpm::RpmError;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const NUMERIC: u8 = 3;

    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: Self::USAGE, error: anyhow::anyhow!(msg.into()) }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: Self::DATA, error: anyhow::anyhow!(msg.into()) }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self { code: Self::NUMERIC, error: anyhow::anyhow!(msg.into()) }
    }

    /// Prefixes the message, keeping the exit code.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        Self { code: self.code, error: self.error.context(what.to_string()) }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: Self::DATA, error: e.into() }
    }
}

impl From<RpmError> for Failure {
    fn from(e: RpmError) -> Self {
        let code = match e {
            RpmError::InvalidArgument(_) | RpmError::InvalidMenu(_) => Self::USAGE,
            _ => Self::DATA,
        };
        Self { code, error: e.into() }
    }
}

impl From<TensorError> for Failure {
    fn from(e: TensorError) -> Self {
        let code = match e {
            TensorError::NonFinite { .. } | TensorError::GradCheck { .. } => Self::NUMERIC,
            _ => Self::DATA,
        };
        Self { code, error: e.into() }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = if e.is_numeric() {
            Self::NUMERIC
        } else if matches!(e, CoreError::Config(_)) {
            Self::USAGE
        } else {
            Self::DATA
        };
        Self { code, error: e.into() }
    }
}
