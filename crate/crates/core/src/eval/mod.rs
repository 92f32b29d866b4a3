//! Confusion-matrix metrics, repeated cross-validation, paired t-tests and
//! the benchmark report.

pub mod cv;
pub mod metrics;
pub mod report;
pub mod ttest;

use thiserror::Error;

use crate::learners::LearnerError;
pub use cv::{
    assign_folds, cross_validate, cross_validate_with, inner_cv_f1, stratified_subsample, CvConfig,
    CvResult, FoldOutcome,
};
pub use metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
pub use report::{benchmark, benchmark_with, BenchmarkReport, FoldTuner, LearnerSummary, TTestRow};
pub use ttest::{paired_ttest, TTest};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no rows to evaluate")]
    Empty,
    #[error("length mismatch: {truth} truth labels, {pred} predictions")]
    Length { truth: usize, pred: usize },
    #[error("a paired test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("cannot split class {class} ({rows} rows) into {folds} folds")]
    Stratification {
        class: usize,
        rows: usize,
        folds: usize,
    },
    #[error("invalid evaluation setting: {0}")]
    Config(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
