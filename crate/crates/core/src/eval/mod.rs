//! Detection evaluation: IoU, greedy matching, precision/recall/F1,
//! confusion matrices and threshold sweeps.
//!
//! Matching ignores classes; class agreement is tallied separately in the
//! confusion matrix over matched pairs.

mod matching;
mod metrics;
mod sweep;

pub use matching::{iou, match_detections, MatchResult, MatchedPair};
pub use metrics::{
    confusion_matrix, detection_metrics, f1_score, ClassMetrics, ConfusionMatrix, DetectionMetrics,
};
pub use sweep::{
    evaluate, sweep, Evaluation, GridCell, ImageEval, MetricsGrid, DEFAULT_IOU_THRESHOLD,
    DEFAULT_IOU_THRESHOLDS, DEFAULT_SCORE_THRESHOLD, DEFAULT_SCORE_THRESHOLDS,
};
