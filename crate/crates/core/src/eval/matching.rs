use serde::Serialize;

use crate::types::{BBox, Detection, GroundTruthLabel};

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub detection: usize,
    pub label: usize,
    pub iou: f64,
}

/// Partition of detections and labels at one operating point.
///
/// Detections scoring below `score_threshold` take no part in matching and
/// appear in neither `pairs` nor `unmatched_detections`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_labels: Vec<usize>,
    pub score_threshold: f64,
    pub iou_threshold: f64,
}

/// Greedy class-blind matching.
///
/// Detections with `score >= score_thr` are visited by descending score
/// (ties: lower index first). Each claims the still-unclaimed label of
/// highest IoU, provided that IoU is positive and at least `iou_thr` (ties:
/// lower label index).
pub fn match_detections(
    dets: &[Detection],
    labels: &[GroundTruthLabel],
    score_thr: f64,
    iou_thr: f64,
) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].score >= score_thr).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));

    let mut claimed = vec![false; labels.len()];
    let mut pairs = Vec::new();
    let mut unmatched_detections = Vec::new();
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (l, label) in labels.iter().enumerate() {
            if claimed[l] {
                continue;
            }
            let v = iou(&dets[d].bbox, &label.bbox);
            if v > 0.0 && v >= iou_thr && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((l, v));
            }
        }
        match best {
            Some((l, v)) => {
                claimed[l] = true;
                pairs.push(MatchedPair { detection: d, label: l, iou: v });
            }
            None => unmatched_detections.push(d),
        }
    }
    unmatched_detections.sort_unstable();
    let unmatched_labels = (0..labels.len()).filter(|&l| !claimed[l]).collect();
    MatchResult {
        pairs,
        unmatched_detections,
        unmatched_labels,
        score_threshold: score_thr,
        iou_threshold: iou_thr,
    }
}
