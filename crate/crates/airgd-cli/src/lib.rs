//! Experiment orchestration for the over-the-air training simulator: config
//! parsing, run/sweep execution, and artifact emission. The binary in
//! `main.rs` is a thin shell over these modules.

pub mod config;
pub mod experiment;
pub mod report;
