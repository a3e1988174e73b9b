use serde::Serialize;

use super::matching::match_detections;
use super::metrics::{confusion_matrix, ConfusionMatrix, DetectionMetrics};
use crate::types::{Detection, GroundTruthLabel};

/// Confidence-score thresholds searched by default.
pub const DEFAULT_SCORE_THRESHOLDS: [f64; 15] = [
    0.001, 0.005, 0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6,
];

/// IoU thresholds searched by default.
pub const DEFAULT_IOU_THRESHOLDS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Default operating point.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.25;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.4;

/// Detections and labels of one image.
#[derive(Debug, Clone, Copy)]
pub struct ImageEval<'a> {
    pub detections: &'a [Detection],
    pub labels: &'a [GroundTruthLabel],
}

/// Pooled metrics and confusion matrix over many images at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub score_threshold: f64,
    pub iou_threshold: f64,
    pub metrics: DetectionMetrics,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate(images: &[ImageEval<'_>], score_thr: f64, iou_thr: f64) -> Evaluation {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut confusion = ConfusionMatrix::default();
    for img in images {
        let m = match_detections(img.detections, img.labels, score_thr, iou_thr);
        tp += m.pairs.len() as u64;
        fp += m.unmatched_detections.len() as u64;
        fn_ += m.unmatched_labels.len() as u64;
        confusion.merge(&confusion_matrix(&m, img.detections, img.labels));
    }
    Evaluation {
        score_threshold: score_thr,
        iou_threshold: iou_thr,
        metrics: DetectionMetrics::from_counts(tp, fp, fn_),
        confusion,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub score_threshold: f64,
    pub iou_threshold: f64,
    pub metrics: DetectionMetrics,
}

/// Metrics over the Cartesian product of score and IoU thresholds, stored
/// with the score threshold as the outer (slow) index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsGrid {
    pub score_thresholds: Vec<f64>,
    pub iou_thresholds: Vec<f64>,
    pub cells: Vec<GridCell>,
}

impl MetricsGrid {
    pub fn get(&self, score_idx: usize, iou_idx: usize) -> &GridCell {
        &self.cells[score_idx * self.iou_thresholds.len() + iou_idx]
    }

    /// Highest-F1 cell; the first in row-major order wins ties.
    pub fn best(&self) -> Option<&GridCell> {
        self.cells.iter().fold(None, |best: Option<&GridCell>, c| match best {
            Some(b) if b.metrics.f1 >= c.metrics.f1 => Some(b),
            _ => Some(c),
        })
    }
}

pub fn sweep(images: &[ImageEval<'_>], score_list: &[f64], iou_list: &[f64]) -> MetricsGrid {
    let mut cells = Vec::with_capacity(score_list.len() * iou_list.len());
    for &s in score_list {
        for &t in iou_list {
            cells.push(GridCell {
                score_threshold: s,
                iou_threshold: t,
                metrics: evaluate(images, s, t).metrics,
            });
        }
    }
    MetricsGrid {
        score_thresholds: score_list.to_vec(),
        iou_thresholds: iou_list.to_vec(),
        cells,
    }
}
