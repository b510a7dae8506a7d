//! Experiment orchestration: configuration, seeded runs across regimes,
//! sensitivity sweeps, invariant validation and table output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod sweep;
pub mod validate;

pub use config::{ExperimentConfig, Regime, SchemeName};
pub use experiment::{aggregate_totals, run_experiment, run_one, RunBundle, RunRecord};
pub use output::write_outputs;
pub use sweep::{sweep_sensitivity, write_sweep};
