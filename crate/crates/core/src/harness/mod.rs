//! Data ingestion, experiment configuration and orchestration, and reports.

pub mod config;
pub mod data;
pub mod experiment;

pub use config::{DatasetKind, ExperimentConfig, Method};
pub use data::{default_data_dir, load_wine_csv, standardize, synthetic_ridge, DATA_DIR_ENV};
pub use experiment::{
    emit_report_csv, run_experiment, run_on_problem, write_diagnostics_csv, write_report_csv, MethodStats,
    PipelineDiagnostics, Problem, RunReport,
};
