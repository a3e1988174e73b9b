pub mod evaluate;
pub mod fit;
pub mod pipeline;
pub mod preprocess;
pub mod stats;
pub mod sweep;
pub mod synth;

use std::path::Path;

use defectometer_core::geometry::analyze_defect;
use defectometer_core::{AnnotatedImage, BBox, DefectClass, Dataset};
use serde::Serialize;

use crate::error::CliError;
use crate::files::load_image;
use crate::geometry_csv::GeometryRow;

/// Which boxes of an annotation file to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxSource {
    Labels,
    Detections,
}

pub fn boxes(image: &AnnotatedImage, source: BoxSource, score_thr: f64) -> Vec<(DefectClass, BBox)> {
    match source {
        BoxSource::Labels => image.labels.iter().map(|l| (l.class, l.bbox)).collect(),
        BoxSource::Detections => image
            .detections
            .iter()
            .filter(|d| d.score >= score_thr)
            .map(|d| (d.class, d.bbox))
            .collect(),
    }
}

/// Fits every box of one image, in box order. The image is only read when
/// there is something to fit.
pub fn fit_boxes(
    annotation: &Path,
    image: &AnnotatedImage,
    boxes: &[(DefectClass, BBox)],
) -> Result<Vec<GeometryRow>, CliError> {
    if boxes.is_empty() {
        return Ok(Vec::new());
    }
    let img = load_image(annotation, image)?;
    Ok(boxes
        .iter()
        .map(|&(class, bbox)| {
            let fit = analyze_defect(&img, &bbox, class).map_err(|e| {
                log::debug!("image {:?}, box {:?}: {e}", image.id, bbox.to_array());
                e.status().to_string()
            });
            GeometryRow { image_id: image.id.clone(), class, fit }
        })
        .collect())
}

/// Paths of the micrographs an annotation file refers to, for the manifest.
pub fn image_paths(annotation: &Path, dataset: &Dataset) -> Vec<std::path::PathBuf> {
    dataset
        .images
        .iter()
        .map(|img| Dataset::resolve_path(annotation, img))
        .collect()
}

pub fn check_unit_interval(name: &str, v: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CliError::invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}
