//! Experiment runner for the GN simulation toolkit: run configuration, seeded
//! ensembles, sweeps, equivalence and bound checks, and report generation.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod report;

pub use config::{resolve_out, RunConfig, OUT_ENV};
pub use experiment::{run_experiment, run_trial, sweep, Aggregate, Manifest};
