use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("realization has no on-grid beamspace matrix")]
    OffGrid,

    #[error("exhaustive scan over {supports} supports exceeds the limit of {limit}")]
    Combinatorial { supports: u128, limit: u128 },

    #[error("ill-conditioned or singular matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("operator adjoint mismatch {0:.3e} exceeds tolerance")]
    AdjointMismatch(f64),

    #[error("zero channel: {0}")]
    ZeroChannel(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
