use std::path::PathBuf;

use defectometer_core::eval::DEFAULT_SCORE_THRESHOLD;
use rayon::prelude::*;
use serde::Serialize;

use super::{boxes, check_unit_interval, fit_boxes, image_paths, BoxSource};
use crate::error::CliError;
use crate::files::{load_sorted, manifest_beside, RunRecord};
use crate::geometry_csv::{to_csv, GeometryRow};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Annotation JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Geometry CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Boxes to measure.
    #[arg(long, value_enum, default_value = "detections")]
    pub source: BoxSource,
    /// Detections scoring below this are skipped.
    #[arg(long, default_value_t = DEFAULT_SCORE_THRESHOLD)]
    pub score_thr: f64,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    check_unit_interval("--score-thr", args.score_thr)?;
    let dataset = load_sorted(&args.input)?;
    let per_image: Vec<Vec<GeometryRow>> = dataset
        .images
        .par_iter()
        .map(|img| fit_boxes(&args.input, img, &boxes(img, args.source, args.score_thr)))
        .collect::<Result<_, _>>()?;
    let rows: Vec<GeometryRow> = per_image.into_iter().flatten().collect();
    let failed = rows.iter().filter(|r| r.fit.is_err()).count();
    log::info!("fitted {} of {} boxes", rows.len() - failed, rows.len());

    let mut record = RunRecord::new("fit");
    record.input(&args.input);
    for (img, path) in dataset.images.iter().zip(image_paths(&args.input, &dataset)) {
        if !boxes(img, args.source, args.score_thr).is_empty() {
            record.input(path);
        }
    }
    record.write(&args.out, &to_csv(&rows))?;
    record.finish(args, &manifest_beside(&args.out))
}
