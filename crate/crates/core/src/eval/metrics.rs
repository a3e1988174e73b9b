use serde::Serialize;

use super::matching::MatchResult;
use crate::types::{DefectClass, Detection, GroundTruthLabel};

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// Detection-level precision, recall and F1. Empty denominators give 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl DetectionMetrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
            tp,
            fp,
            fn_,
        }
    }
}

pub fn detection_metrics(m: &MatchResult) -> DetectionMetrics {
    DetectionMetrics::from_counts(
        m.pairs.len() as u64,
        m.unmatched_detections.len() as u64,
        m.unmatched_labels.len() as u64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: DefectClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Class agreement over matched pairs. Rows are predicted classes, columns
/// human-labeled classes, both in [`DefectClass::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts }
    }

    pub fn add(&mut self, predicted: DefectClass, labeled: DefectClass) {
        self.counts[predicted.index()][labeled.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for r in 0..3 {
            for c in 0..3 {
                self.counts[r][c] += other.counts[r][c];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, predicted: DefectClass) -> u64 {
        self.counts[predicted.index()].iter().sum()
    }

    pub fn column_sum(&self, labeled: DefectClass) -> u64 {
        self.counts.iter().map(|row| row[labeled.index()]).sum()
    }

    pub fn off_diagonal(&self) -> u64 {
        self.total() - (0..3).map(|i| self.counts[i][i]).sum::<u64>()
    }

    /// Each cell as a percentage of its row (predicted-class) total; `None`
    /// for empty rows.
    pub fn row_percentages(&self) -> [[Option<f64>; 3]; 3] {
        let mut out = [[None; 3]; 3];
        for (r, row) in self.counts.iter().enumerate() {
            let sum: u64 = row.iter().sum();
            if sum > 0 {
                for c in 0..3 {
                    out[r][c] = Some(100.0 * row[c] as f64 / sum as f64);
                }
            }
        }
        out
    }

    /// Per-class precision (diagonal over row) and recall (diagonal over column).
    pub fn per_class(&self) -> [ClassMetrics; 3] {
        DefectClass::ALL.map(|class| {
            let hit = self.counts[class.index()][class.index()] as f64;
            let precision = ratio(hit, self.row_sum(class) as f64);
            let recall = ratio(hit, self.column_sum(class) as f64);
            ClassMetrics {
                class,
                precision,
                recall,
                f1: f1_score(precision, recall),
            }
        })
    }
}

pub fn confusion_matrix(
    m: &MatchResult,
    dets: &[Detection],
    labels: &[GroundTruthLabel],
) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for p in &m.pairs {
        cm.add(dets[p.detection].class, labels[p.label].class);
    }
    cm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::match_detections;
    use crate::types::BBox;
    use proptest::prelude::*;

    #[test]
    fn degenerate_counts() {
        let m = DetectionMetrics::from_counts(0, 0, 0);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn counts_to_rates() {
        let m = DetectionMetrics::from_counts(6, 2, 4);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
    }

    #[test]
    fn table_style_f1() {
        assert!((f1_score(0.73, 0.83) - 0.7768).abs() < 1e-4);
        assert!((f1_score(0.65, 0.71) - 0.68).abs() < 0.005);
    }

    #[test]
    fn diagonal_percentages() {
        let cm = ConfusionMatrix::from_counts([[239, 21, 14], [17, 416, 8], [33, 13, 166]]);
        let p = cm.row_percentages();
        assert!((p[0][0].unwrap() - 87.226).abs() < 1e-3);
        assert!((p[1][1].unwrap() - 94.331).abs() < 1e-3);
        assert_eq!(cm.total(), 927);
    }

    #[test]
    fn identity_matrix_from_correct_matches() {
        let b = |x: f64| BBox::new(x, 0.0, x + 5.0, 5.0).unwrap();
        let labels: Vec<GroundTruthLabel> = DefectClass::ALL
            .iter()
            .enumerate()
            .map(|(i, &class)| GroundTruthLabel { class, bbox: b(10.0 * i as f64) })
            .collect();
        let dets: Vec<Detection> = labels
            .iter()
            .map(|l| Detection { class: l.class, bbox: l.bbox, score: 0.9 })
            .collect();
        let m = match_detections(&dets, &labels, 0.25, 0.4);
        let cm = confusion_matrix(&m, &dets, &labels);
        assert_eq!(cm.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        for row in cm.row_percentages().iter().enumerate() {
            assert_eq!(row.1[row.0], Some(100.0));
        }
        assert_eq!(cm.off_diagonal(), 0);
    }

    proptest! {
        #[test]
        fn f1_between_precision_and_recall(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
            let m = DetectionMetrics::from_counts(tp, fp, fn_);
            if m.precision + m.recall > 0.0 {
                let lo = m.precision.min(m.recall);
                let hi = m.precision.max(m.recall);
                prop_assert!(m.f1 >= lo - 1e-12 && m.f1 <= hi + 1e-12);
            }
        }
    }
}
