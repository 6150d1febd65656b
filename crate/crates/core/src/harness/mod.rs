//! Experiment orchestration: configuration, replica-parallel estimation,
//! critical-point scans, CSV output and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;

pub use cli::run_cli;
pub use config::ExperimentConfig;
pub use experiment::{estimate_fq, run_grid, scan_brackets, GridSpec, ResultRow, ScanSummary};
