//! Library side of the `mcr` command: configuration, per-entry runs and reports.

pub mod config;
pub mod report;
pub mod runner;
