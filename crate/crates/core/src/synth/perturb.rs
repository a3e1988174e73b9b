use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::rng;
use crate::eval::iou;
use crate::types::{BBox, DefectClass, Detection, GroundTruthLabel};

/// Corruption applied by [`perturb_detections`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbParams {
    /// Minimum IoU between a kept label and its jittered box; 1 disables jitter.
    pub iou_floor: f64,
    pub class_flip_prob: f64,
    pub miss_prob: f64,
    /// Mean number of spurious boxes per image (Poisson).
    pub spurious_rate: f64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self { iou_floor: 1.0, class_flip_prob: 0.0, miss_prob: 0.0, spurious_rate: 0.0 }
    }
}

/// What happened to one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LabelOutcome {
    Missed,
    Kept { detection: usize, flipped: bool, iou: f64 },
}

/// Record of the draws made by [`perturb_detections`], enough to recompute
/// the expected evaluation counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbLog {
    pub labels: Vec<LabelOutcome>,
    /// Indices of spurious detections.
    pub spurious: Vec<usize>,
}

impl PerturbLog {
    pub fn kept(&self) -> usize {
        self.labels.iter().filter(|o| matches!(o, LabelOutcome::Kept { .. })).count()
    }

    pub fn missed(&self) -> usize {
        self.labels.len() - self.kept()
    }

    pub fn flipped(&self) -> usize {
        self.labels
            .iter()
            .filter(|o| matches!(o, LabelOutcome::Kept { flipped: true, .. }))
            .count()
    }
}

fn jittered(b: &BBox, j: [f64; 4], amount: f64, width: f64, height: f64) -> Option<BBox> {
    let (w, h) = (b.width(), b.height());
    BBox::new(
        b.x_min() + j[0] * amount * w,
        b.y_min() + j[1] * amount * h,
        b.x_max() + j[2] * amount * w,
        b.y_max() + j[3] * amount * h,
    )
    .ok()?
    .clipped(width, height)
}

/// Simulates an imperfect detector on one image of `width × height` pixels.
///
/// Per label, in order: a miss draw, a flip draw, a replacement class and four
/// edge offsets are always consumed, so outcomes of later labels do not depend
/// on earlier ones. Edge offsets are halved until the box clears `iou_floor`.
/// Kept boxes score in `[0.5, 0.95]` growing with IoU, ×0.9 when the class was
/// flipped; spurious boxes score in `[0.26, 0.5)` and never touch a label.
pub fn perturb_detections(
    labels: &[GroundTruthLabel],
    params: &PerturbParams,
    width: usize,
    height: usize,
    seed: u64,
) -> (Vec<Detection>, PerturbLog) {
    let mut r = rng(seed);
    let (wf, hf) = (width as f64, height as f64);
    let mut dets = Vec::new();
    let mut outcomes = Vec::with_capacity(labels.len());
    for label in labels {
        let miss = r.random::<f64>() < params.miss_prob;
        let flip = r.random::<f64>() < params.class_flip_prob;
        let shift: usize = r.random_range(1..DefectClass::ALL.len());
        let j: [f64; 4] = std::array::from_fn(|_| r.random_range(-1.0..=1.0));
        if miss {
            outcomes.push(LabelOutcome::Missed);
            continue;
        }
        let mut amount = 0.5 * (1.0 - params.iou_floor).max(0.0);
        let mut bbox = label.bbox;
        for _ in 0..64 {
            if amount == 0.0 {
                break;
            }
            if let Some(b) = jittered(&label.bbox, j, amount, wf, hf) {
                if iou(&b, &label.bbox) >= params.iou_floor {
                    bbox = b;
                    break;
                }
            }
            amount /= 2.0;
        }
        let overlap = iou(&bbox, &label.bbox);
        let class = if flip {
            DefectClass::ALL[(label.class.index() + shift) % DefectClass::ALL.len()]
        } else {
            label.class
        };
        let score = (0.5 + 0.45 * overlap) * if flip { 0.9 } else { 1.0 };
        outcomes.push(LabelOutcome::Kept { detection: dets.len(), flipped: flip, iou: overlap });
        dets.push(Detection { class, bbox, score });
    }

    let n_spurious = if params.spurious_rate > 0.0 {
        Poisson::new(params.spurious_rate).map(|p| p.sample(&mut r) as usize).unwrap_or(0)
    } else {
        0
    };
    let mut spurious = Vec::new();
    for _ in 0..n_spurious {
        for _ in 0..200 {
            let side_x = r.random_range(6.0..=32.0f64).min(wf);
            let side_y = r.random_range(6.0..=32.0f64).min(hf);
            let x0 = r.random_range(0.0..=(wf - side_x));
            let y0 = r.random_range(0.0..=(hf - side_y));
            let class = DefectClass::ALL[r.random_range(0..DefectClass::ALL.len())];
            let score = r.random_range(0.26..0.5);
            let Ok(b) = BBox::new(x0, y0, x0 + side_x, y0 + side_y) else { continue };
            if labels.iter().all(|l| l.bbox.intersection_area(&b) <= 0.0) {
                spurious.push(dets.len());
                dets.push(Detection { class, bbox: b, score });
                break;
            }
        }
    }
    (dets, PerturbLog { labels: outcomes, spurious })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{confusion_matrix, detection_metrics, match_detections};

    fn grid_labels(n: usize) -> Vec<GroundTruthLabel> {
        (0..n)
            .map(|i| {
                let (x, y) = ((i % 10) as f64 * 40.0 + 5.0, (i / 10) as f64 * 40.0 + 5.0);
                GroundTruthLabel {
                    class: DefectClass::ALL[i % 3],
                    bbox: BBox::new(x, y, x + 20.0 + (i % 7) as f64, y + 18.0).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn identity_when_uncorrupted() {
        let labels = grid_labels(30);
        let (dets, log) = perturb_detections(&labels, &PerturbParams::default(), 400, 400, 5);
        assert_eq!(dets.len(), 30);
        for (d, l) in dets.iter().zip(&labels) {
            assert_eq!((d.bbox, d.class), (l.bbox, l.class));
        }
        assert_eq!(log.kept(), 30);
        let m = detection_metrics(&match_detections(&dets, &labels, 0.25, 0.4));
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
    }

    #[test]
    fn misses_match_the_log() {
        let labels = grid_labels(100);
        let params = PerturbParams { miss_prob: 0.2, iou_floor: 0.7, ..Default::default() };
        let (dets, log) = perturb_detections(&labels, &params, 400, 400, 11);
        assert!(log.missed() > 5 && log.missed() < 40);
        let m = detection_metrics(&match_detections(&dets, &labels, 0.25, 0.4));
        assert_eq!(m.tp as usize, log.kept());
        assert_eq!(m.recall, log.kept() as f64 / 100.0);
        let again = perturb_detections(&labels, &params, 400, 400, 11);
        assert_eq!(again.1, log);
    }

    #[test]
    fn jitter_respects_floor() {
        let labels = grid_labels(50);
        for floor in [0.3, 0.5, 0.9] {
            let params = PerturbParams { iou_floor: floor, ..Default::default() };
            let (dets, log) = perturb_detections(&labels, &params, 400, 400, 2);
            for (d, l) in dets.iter().zip(&labels) {
                assert!(iou(&d.bbox, &l.bbox) >= floor);
                assert!(d.bbox.is_within(400.0, 400.0));
            }
            assert!(log.labels.iter().any(|o| matches!(o, LabelOutcome::Kept { iou, .. } if *iou < 1.0)));
        }
    }

    #[test]
    fn full_flip_empties_diagonal() {
        let labels = grid_labels(40);
        let params = PerturbParams { class_flip_prob: 1.0, ..Default::default() };
        let (dets, _) = perturb_detections(&labels, &params, 400, 400, 3);
        let m = match_detections(&dets, &labels, 0.25, 0.4);
        let cm = confusion_matrix(&m, &dets, &labels);
        assert_eq!(cm.off_diagonal(), 40);
    }

    #[test]
    fn spurious_boxes_miss_every_label() {
        let labels = grid_labels(20);
        let params = PerturbParams { spurious_rate: 6.0, ..Default::default() };
        let (dets, log) = perturb_detections(&labels, &params, 400, 400, 8);
        assert!(!log.spurious.is_empty());
        let m = detection_metrics(&match_detections(&dets, &labels, 0.25, 0.4));
        assert_eq!(m.fp as usize, log.spurious.len());
        assert_eq!(m.tp, 20);
    }
}
