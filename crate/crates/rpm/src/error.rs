use thiserror::Error;

pub type Result<T, E = RpmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RpmError {
    #[error("rule menu: {0}")]
    InvalidMenu(String),

    #[error("{config}: cannot satisfy {what}")]
    Unsatisfiable { config: &'static str, what: String },

    #[error("no valid choice completes the matrix")]
    NoValidChoice,

    #[error("choices {0:?} all complete the matrix")]
    MultipleValidChoices(Vec<usize>),

    #[error("item {index}: {msg}")]
    MissingMetadata { index: usize, msg: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("dataset format error at byte {offset}: {msg}")]
    Format { msg: String, offset: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
