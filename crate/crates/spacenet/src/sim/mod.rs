//! Scenario runner and benchmark harness: declarative configs, fraud and
//! crash injection, deterministic end-to-end runs, machine-readable
//! reports.

pub mod bench;
pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

pub use bench::{bench_pod, bench_pof};
pub use config::{ConfigIssue, CrashInjection, FraudInjection, FraudKind, ScenarioConfig};
pub use report::{
    emit_report, BenchRow, ConfusionRow, DetectionReport, EpochRow, PofSummary, ReportFormat,
    SimReport, REPORT_SCHEMA_VERSION,
};
pub use runner::{run_scenario, RunOutput};

#[derive(Debug, Error)]
pub enum SimError {
    /// Config file failed to parse; the message carries line/position.
    #[error("config parse error: {0}")]
    Parse(String),
    /// Config parsed but one or more fields are out of range.
    #[error("invalid config:\n{}", format_issues(.0))]
    Invalid(Vec<ConfigIssue>),
    #[error("i/o error: {0}")]
    Io(String),
    /// A run-time invariant failed; the name says which.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl SimError {
    /// CLI exit code: 1 invariant violation, 2 config error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Invariant(_) => 1,
            SimError::Parse(_) | SimError::Invalid(_) => 2,
            SimError::Io(_) => 3,
        }
    }
}
