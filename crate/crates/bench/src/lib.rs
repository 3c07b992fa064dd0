//! Benchmark harness: configure, set up, solve and report.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, Problem, ReportFormat, RunConfig, Settings};
pub use report::RunReport;
pub use run::{run_benchmark, BenchError};
