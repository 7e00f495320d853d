use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("trajectory diverged: {0}")]
    Divergence(String),
    #[error("overflow at step {step}")]
    Overflow { step: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("fit failed for trajectory {0}")]
    FitFailure(String),
    #[error("empty prior: {0}")]
    EmptyPrior(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("prediction failed: {0}")]
    PredictionFailure(String),
    #[error("truth undefined for trajectory {0}")]
    TruthUndefined(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
