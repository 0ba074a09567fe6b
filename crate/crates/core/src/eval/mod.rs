//! Splits, classification metrics and cross-validation.

pub mod cv;
pub mod metrics;
pub mod splits;

pub use cv::{aggregate, cross_validate, permute_labels, Aggregate, CvConfig, CvResult, FoldResult, FoldSeeds, MeanSd};
pub use metrics::{compute_metrics, roc_curve, trapezoid_auc, ClassMetrics, MetricsReport, Rate};
pub use splits::{make_splits, SplitMode, SplitPlan};
