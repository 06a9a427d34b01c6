//! Experiment driver behind the `osc-lab` binary.

pub mod config;
pub mod error;
pub mod grid;
pub mod output;
pub mod run;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use run::{run, Check, Outcome};
