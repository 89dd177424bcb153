use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no source-sink path after {attempts} generation attempts")]
    GenerationFailed { attempts: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration of {count} candidates exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("problem too large for the dense solver: {0}")]
    ProblemTooLarge(String),

    #[error("invalid MILP: {0}")]
    InvalidMilp(String),

    #[error("numerical failure in the simplex solver: {0}")]
    Numerical(String),

    #[error("invalid permutation for group {group}")]
    InvalidPermutation { group: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("unsupported format version {0}")]
    FormatVersion(u32),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
