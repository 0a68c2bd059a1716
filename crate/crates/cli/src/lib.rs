//! Experiment catalog, runner and acceptance suite for the `traplab` binary.

pub mod catalog;
pub mod error;
pub mod oracle;
pub mod params;
pub mod runner;
pub mod suite;

pub use catalog::{execute, find, list_experiments, CatalogEntry, Experiment, Outcome};
pub use error::RunError;
pub use runner::{run_experiment, ExperimentConfig, RunReport};
pub use suite::{format_summary, reproduce_all, Status, SuiteReport};
