pub mod config;
pub mod experiments;

pub use experiments::{run_experiment, CliError, Command, ExperimentSpec};
