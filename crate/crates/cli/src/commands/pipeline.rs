use std::path::PathBuf;

use defectometer_core::eval::DEFAULT_SCORE_THRESHOLD;
use defectometer_core::geometry::DefectGeometry;
use rayon::prelude::*;
use serde::Serialize;

use super::{boxes, check_unit_interval, fit_boxes, image_paths, BoxSource};
use crate::error::CliError;
use crate::files::{load_sorted, manifest_beside, to_json, RunRecord};
use crate::geometry_csv::{to_csv, GeometryRow};
use crate::report::{build, check_units, total_area, FitCounts};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Annotation JSON with labels and detections.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Detections scoring below this are ignored.
    #[arg(long, default_value_t = DEFAULT_SCORE_THRESHOLD)]
    pub score_thr: f64,
    /// Also write truth.csv and predicted.csv geometry tables here.
    #[arg(long)]
    pub geometry_dir: Option<PathBuf>,
}

fn successes(rows: &[GeometryRow]) -> Vec<DefectGeometry> {
    rows.iter().filter_map(|r| r.fit.as_ref().ok().copied()).collect()
}

pub fn run(args: &Args) -> Result<(), CliError> {
    check_unit_interval("--score-thr", args.score_thr)?;
    let dataset = load_sorted(&args.input)?;
    let (area, units) = total_area(&dataset)?;
    let fitted: Vec<(Vec<GeometryRow>, Vec<GeometryRow>)> = dataset
        .images
        .par_iter()
        .map(|img| {
            let gt = fit_boxes(&args.input, img, &boxes(img, BoxSource::Labels, 0.0))?;
            let pred = fit_boxes(&args.input, img, &boxes(img, BoxSource::Detections, args.score_thr))?;
            Ok((gt, pred))
        })
        .collect::<Result<_, CliError>>()?;
    let (gt_rows, pred_rows): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let gt_rows: Vec<GeometryRow> = gt_rows.into_iter().flatten().collect();
    let pred_rows: Vec<GeometryRow> = pred_rows.into_iter().flatten().collect();

    let gt = successes(&gt_rows);
    let pred = successes(&pred_rows);
    check_units(&gt, units, "labels")?;
    check_units(&pred, units, "detections")?;
    let mut report = build(Some(&gt), &pred, area, units)?;
    report.score_threshold = Some(args.score_thr);
    report.fits = Some(FitCounts {
        labels_ok: gt.len(),
        labels_failed: gt_rows.len() - gt.len(),
        detections_ok: pred.len(),
        detections_failed: pred_rows.len() - pred.len(),
    });
    log::info!(
        "fitted {}/{} labels and {}/{} detections",
        gt.len(),
        gt_rows.len(),
        pred.len(),
        pred_rows.len()
    );

    let mut record = RunRecord::new("pipeline");
    record.input(&args.input);
    for (img, path) in dataset.images.iter().zip(image_paths(&args.input, &dataset)) {
        if !img.labels.is_empty() || !boxes(img, BoxSource::Detections, args.score_thr).is_empty() {
            record.input(path);
        }
    }
    if let Some(dir) = &args.geometry_dir {
        record.write(&dir.join("truth.csv"), &to_csv(&gt_rows))?;
        record.write(&dir.join("predicted.csv"), &to_csv(&pred_rows))?;
    }
    record.write(&args.out, &to_json(&report))?;
    record.finish(args, &manifest_beside(&args.out))
}
