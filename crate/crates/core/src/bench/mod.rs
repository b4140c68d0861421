//! Benchmark harness: task suites, strategy configurations, resumable runs,
//! and outcome reports.

mod config;
mod report;
mod run;
mod suite;

use thiserror::Error;

use crate::retrieval::RetrievalError;

pub use config::{load_bench_config, BenchConfigFile, RunnerSpec};
pub use report::{
    aggregate, emit_report, percentages, AggregateCell, Aggregation, AttemptRecord, BenchReport, ReportFormat,
    TraceRecord,
};
pub use run::{read_journal, run_suite, RunOptions};
pub use suite::{load_suite, parse_suite, BenchTask};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("task {0}: data file not found")]
    MissingDataFile(String),
    #[error("task {id}: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("knowledge index: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}
