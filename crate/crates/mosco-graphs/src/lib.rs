//! Experiment runner for [`mosco_graphs_core`]: JSON configuration, parallel
//! sweeps, `convergence.csv`, graph exports and the audit report.

pub mod config;
pub mod export;
pub mod runner;
pub mod table;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{run, Experiment};
