use thiserror::Error;

/// Errors raised by the analytics core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unexpected CSV header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("nothing to rank")]
    NothingToRank,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient pairs: need at least 2 complete cases, got {0}")]
    InsufficientPairs(usize),

    #[error("cannot test separation: {0}")]
    CannotTestSeparation(String),

    #[error("class too small to stratify: {class} has {count} members for k = {k}")]
    ClassTooSmall {
        class: &'static str,
        count: usize,
        k: usize,
    },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("divergence; reduce learning_rate")]
    Divergence,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input value")]
    NonFinite,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,

    #[error("industry mismatch: {0}")]
    IndustryMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
