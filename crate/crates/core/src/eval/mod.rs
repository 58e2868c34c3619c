//! Trajectory alignment, drift metrics and loop-detection precision/recall.

mod metrics;
mod pr;
mod trajectory;

pub use metrics::{
    accumulated_error, align_segment, associate, ate, evaluate_trajectories, loop_closure_error_pct, scale_drift,
    EvalOptions, TrajectoryMetrics,
};
pub use pr::{precision_recall, recall_at_full_precision, write_pr_csv, DetectionRecord, PrPoint};
pub use trajectory::Trajectory;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("timestamps must be strictly increasing (entry {0})")]
    NonIncreasing(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("segment is degenerate: {0}")]
    Degenerate(String),
    #[error("trajectory has zero length")]
    ZeroLength,
    #[error("too few associated poses ({0})")]
    TooFewPoses(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
