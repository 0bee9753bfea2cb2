//! Benchmark harness around `exbench-core`: dataset files, grid-search
//! tuning, the run sweep with crash isolation, aggregation into
//! median ± IQR tables and a plain-text report.

pub mod aggregate;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod records;
pub mod report;

use std::path::Path;

use thiserror::Error;

pub use config::{ExperimentConfig, RegressorSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("format: {0}")]
    Format(String),
    #[error("no records to aggregate")]
    Empty,
    #[error(transparent)]
    Dataset(#[from] exbench_core::dataset::DatasetError),
    #[error(transparent)]
    Regressor(#[from] exbench_core::regressors::RegressorError),
    #[error(transparent)]
    Expr(#[from] exbench_core::expr::ExprError),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.display().to_string(), source }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        BenchError::Csv { path: path.display().to_string(), source }
    }
}
