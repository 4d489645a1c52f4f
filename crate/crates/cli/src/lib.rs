//! Configuration files and sweep runner for the `gitfl` command.

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{load_config, parse_config, ExperimentSpec, RunSpec};
pub use error::{CliError, Result};
pub use experiment::{partition_stats, run_experiment, summarize_dir, write_summary, CellSummary, ExperimentOutcome};

/// Overrides the `output` directory of a configuration when set.
pub const OUTPUT_DIR_ENV: &str = "GITFL_OUTPUT_DIR";
