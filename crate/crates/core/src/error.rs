use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("volume became non-positive at period {period}")]
    NonPositiveVolume { period: usize },

    #[error("state became non-finite at period {period}")]
    NonFiniteState { period: usize },

    #[error("posterior ensemble is empty")]
    EmptyEnsemble,

    #[error("requested {requested} distinct ensemble members but only {available} are available")]
    EnsembleTooSmall { requested: usize, available: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("Markov chain diverged: {0}")]
    ChainDiverged(String),

    #[error("covariance matrix is not positive semi-definite")]
    NotPositiveSemiDefinite,

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("checksum mismatch for {task} at H={horizon}: {reuse} vs {brute}")]
    ChecksumMismatch { task: String, horizon: usize, reuse: String, brute: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
