//! Orchestration for the `align` command line: run configuration, the
//! end-to-end run, synthetic data and report files.

pub mod cli;
pub mod config;
pub mod report;
pub mod run;
pub mod svg;
pub mod synth;
