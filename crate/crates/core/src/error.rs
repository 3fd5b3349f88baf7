use thiserror::Error;

/// Errors produced by the accountant, the optimizers and the data layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("invalid alpha grid: {0}")]
    InvalidAlphaGrid(String),

    #[error("Renyi order {0} is not supported here (need an integer >= 3)")]
    UnsupportedOrder(f64),

    #[error("sampling ratio {0} is outside [0, 1]")]
    InvalidRatio(f64),

    #[error("curves are defined on different alpha grids")]
    GridMismatch,

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("no sigma below {cap} reaches epsilon {epsilon} at delta {delta}")]
    InfeasibleBudget { epsilon: f64, delta: f64, cap: f64 },

    #[error("cannot draw an empty noise vector")]
    EmptyVector,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite iterate at step {step} in {variable}")]
    NonFinite { step: usize, variable: &'static str },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
