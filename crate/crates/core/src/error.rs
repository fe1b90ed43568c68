use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Value or shape outside an operation's input domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller broke an operation precondition (e.g. thin-only op on a free splat).
    #[error("contract violation: {0}")]
    ContractViolation(&'static str),

    /// Bad configuration value (unknown key, unsupported degree, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// PLY file could not be decoded; `offset` is the byte where parsing gave up.
    #[error("ply parse error at byte {offset}: {message}")]
    PlyParse { offset: u64, message: String },

    /// Dataset directory failed validation; nothing was loaded.
    #[error("dataset load error: {0}")]
    DatasetLoad(String),

    /// Optimizer received a non-finite gradient; the iteration was aborted.
    #[error("non-finite gradient at iteration {iter}")]
    NonFiniteGradient { iter: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}
