use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum DpmfError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cholesky factorization failed even with jitter {max_jitter:e} (n = {n})")]
    NotPositiveDefinite { n: usize, max_jitter: f64 },

    #[error("singular triangular factor at row {0}")]
    SingularFactor(usize),

    #[error("time {t} precedes the first season start {first_start}")]
    BeforeFirstSeason { t: f64, first_start: f64 },

    #[error("invalid season calendar: {0}")]
    InvalidCalendar(String),

    #[error("invalid chain state: {0}")]
    InvalidState(String),

    #[error("slice sampler exhausted {0} shrinkage steps")]
    SliceExhausted(usize),

    #[error("unknown member: {0}")]
    UnknownMember(String),

    #[error("line {line}: {message}")]
    Data { line: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DpmfError>;
