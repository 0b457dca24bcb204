use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("graph is not simple")]
    NotSimple,
    #[error("inclusion probability {0} exceeds 1")]
    ProbabilityTooLarge(f64),
    #[error("rejection budget of {0} attempts exhausted")]
    RejectionBudget(usize),
    #[error("enumeration needs {states:e} states, budget is {budget:e}")]
    Budget { states: f64, budget: f64 },
    #[error("divergent regime: {0}")]
    Divergent(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
