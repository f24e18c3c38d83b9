use thiserror::Error;

/// Errors surfaced by configuration validation and simulation runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid traffic config: {0}")]
    InvalidTraffic(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid update strategy: {0}")]
    InvalidUpdate(String),

    #[error("invalid baseline: {0}")]
    InvalidBaseline(String),

    #[error("routing distribution sums to {sum} (must be 1 within {tolerance})")]
    RoutingNotNormalized { sum: f64, tolerance: f64 },

    #[error("analytic update-probability lower bound is zero; the optimality conditions cannot be certified for this configuration")]
    UpdateBoundZero,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
