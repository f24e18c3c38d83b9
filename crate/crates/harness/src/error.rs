use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// TOML parse failure; the message carries line/column context.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("config invariant violated: {0}")]
    InvalidConfig(String),

    #[error("unknown preset '{0}' (known: heavy_traffic_sweep, herd_behavior, delayed_info, pooled_reference)")]
    UnknownPreset(String),

    #[error("epsilon {epsilon}, replication {replication}: {source}")]
    Simulation {
        epsilon: f64,
        replication: u32,
        source: ledsim_core::Error,
    },

    #[error(transparent)]
    Core(#[from] ledsim_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
