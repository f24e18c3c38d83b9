//! Experiment harness: configuration ingestion, epsilon-sweep orchestration
//! with parallel replications, preset experiments, condition verification,
//! and CSV / plot-data emission.

pub mod config;
pub mod error;
pub mod presets;
pub mod sweep;
pub mod verify;

pub use config::{load_config, ArrivalSpec, ExperimentConfig, PolicySection};
pub use error::HarnessError;
pub use presets::{run_preset, PresetName, PresetOverrides};
pub use sweep::{run_sweep, write_csv, SummaryRow, SUMMARY_SCHEMA_VERSION};
pub use verify::{verify_conditions, VerifyReport};

pub type Result<T> = std::result::Result<T, HarnessError>;
