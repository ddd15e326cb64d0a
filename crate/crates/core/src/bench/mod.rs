//! Experiment harness: metrics, bootstrap intervals, and the subcommand
//! runner behind the `adp` CLI.

pub mod experiment;
pub mod metrics;

pub use experiment::{
    run_experiment, DataSource, ExperimentConfig, ExperimentReport, ReportRow, Subcommand,
};
pub use metrics::{
    bootstrap_ci, false_safe_count, mean, metric_fn_ratio, metric_topk, metric_topk_partial,
    TopKMetrics,
};
