//! Experiment driver for spinor flows: configuration files, initial data,
//! batch runs with on-disk artifacts, and invariant check suites.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod synth;

pub use checks::{check, check_with, CheckReport, CheckResult, Context, Suite, OPERATIONS};
pub use config::{parse_config, ConfigErrors, ExperimentConfig};
pub use experiment::{analyze_trace, reconstruct_run, run_experiment, run_experiment_in, ExperimentError, RunSummary};
pub use synth::{synthesize_initial, Recipe, SynthError};
