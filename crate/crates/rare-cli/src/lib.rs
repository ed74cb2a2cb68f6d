//! Batch experiment runner for the multi-band Rydberg atomic receiver.
//!
//! The binary (`rare`) dispatches five experiments — waveform validation,
//! attention sweep, sum-square sweep, power sweep, and the allocation
//! report — against a scenario file and an experiment config, and writes
//! every result as a CSV artifact whose body is byte-identical across
//! re-runs with the same inputs.
//!
//! The library half exists so integration tests can call the experiment
//! functions directly (same code path as the binary) instead of scraping
//! stdout.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, RunMode};
pub use experiments::{CliError, RunContext};
