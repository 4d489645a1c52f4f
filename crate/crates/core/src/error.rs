use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("weights and models differ in length ({weights} vs {models})")]
    LengthMismatch { weights: usize, models: usize },

    #[error("cannot combine an empty set of models")]
    Empty,

    #[error("weight sum must be positive, got {0}")]
    ZeroWeightSum(f64),

    #[error("invalid weight {0}: weights must be finite and non-negative")]
    InvalidWeight(f64),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("no eligible client for branch {branch}")]
    NoEligibleClient { branch: usize },

    #[error("client {0} completed a training it was not dispatched")]
    ClientNotBusy(usize),

    #[error("client {0} is already busy")]
    ClientBusy(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
