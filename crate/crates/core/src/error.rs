use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("accumulator configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("feature schema mismatch: expected user/content widths {expected:?}, got {actual:?}")]
    SchemaMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus assignment requested for a user-only diversion plan")]
    NotCoDiverted,

    #[error("ablation fraction must lie in [0, 1), got {0}")]
    AblationFraction(f64),

    #[error("spearman correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("malformed log line {line}: {reason}")]
    LogParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
