//! Experiment harness for the DAC simulation lab: configuration parsing,
//! the measurement pipeline, run records and file exports.

pub mod config;
pub mod export;
pub mod pipeline;
pub mod record;
pub mod scheme;

pub use config::{ConfigError, ExperimentConfig};
pub use pipeline::{
    run_experiment, run_osr_sweep, run_seed, HarnessError, RunPlan, SeedOutcome, SweepTable,
};
pub use record::{Aggregate, MetricsRow, RunRecord};
pub use scheme::{list_schemes, SchemeId};
