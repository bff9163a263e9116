use thiserror::Error;

/// Errors surfaced by constructors, drivers, and oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid convex set descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("invalid scalar function descriptor: {0}")]
    InvalidFunction(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("schedule rejected: {0}")]
    ScheduleRejected(String),

    #[error("invalid stop rule: {0}")]
    InvalidStopRule(String),

    #[error("contraction rejected: {0}")]
    ContractionRejected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probe rejected (hypothesis not met): {0}")]
    ProbeRejected(String),

    #[error("iteration did not converge: {0}")]
    DidNotConverge(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("empty intersection detected: {0}")]
    EmptyIntersection(String),

    #[error("problem spec invalid: {0}")]
    SpecValidation(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
