use std::path::PathBuf;

use defectometer_core::eval::{
    evaluate, GridCell, MetricsGrid, DEFAULT_IOU_THRESHOLDS, DEFAULT_SCORE_THRESHOLD, DEFAULT_SCORE_THRESHOLDS,
};
use rayon::prelude::*;
use serde::Serialize;

use super::check_unit_interval;
use super::evaluate::image_evals;
use crate::error::CliError;
use crate::files::{load_sorted, manifest_in, to_json, RunRecord};
use crate::svg::precision_recall_chart;

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Annotation JSON holding both labels and detections.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for grid.csv, sweep.json and pr_vs_iou.svg.
    #[arg(long)]
    pub out: PathBuf,
    /// Score thresholds, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SCORE_THRESHOLDS)]
    pub scores: Vec<f64>,
    /// IoU thresholds, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_IOU_THRESHOLDS)]
    pub ious: Vec<f64>,
    /// Score threshold whose row is charted; defaults to 0.25 when swept,
    /// else the best-F1 row.
    #[arg(long)]
    pub chart_score: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    images: usize,
    score_thresholds: &'a [f64],
    iou_thresholds: &'a [f64],
    best: Option<&'a GridCell>,
}

fn grid_csv(grid: &MetricsGrid) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["score_thr", "iou_thr", "tp", "fp", "fn", "precision", "recall", "f1"])
        .expect("in-memory write");
    for c in &grid.cells {
        let m = &c.metrics;
        w.write_record([
            c.score_threshold.to_string(),
            c.iou_threshold.to_string(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn run(args: &Args) -> Result<(), CliError> {
    if args.scores.is_empty() || args.ious.is_empty() {
        return Err(CliError::invalid("threshold lists must be non-empty"));
    }
    for &s in &args.scores {
        check_unit_interval("score threshold", s)?;
    }
    for &t in &args.ious {
        check_unit_interval("IoU threshold", t)?;
    }
    let dataset = load_sorted(&args.input)?;
    let images = image_evals(&dataset);
    let pairs: Vec<(f64, f64)> = args
        .scores
        .iter()
        .flat_map(|&s| args.ious.iter().map(move |&t| (s, t)))
        .collect();
    let cells: Vec<GridCell> = pairs
        .par_iter()
        .map(|&(s, t)| GridCell { score_threshold: s, iou_threshold: t, metrics: evaluate(&images, s, t).metrics })
        .collect();
    let grid = MetricsGrid { score_thresholds: args.scores.clone(), iou_thresholds: args.ious.clone(), cells };
    let best = grid.best();
    if let Some(b) = best {
        log::info!(
            "best f1 {:.4} at score {} / IoU {}",
            b.metrics.f1,
            b.score_threshold,
            b.iou_threshold
        );
    }

    let chart_score = args
        .chart_score
        .or_else(|| args.scores.contains(&DEFAULT_SCORE_THRESHOLD).then_some(DEFAULT_SCORE_THRESHOLD))
        .or(best.map(|b| b.score_threshold))
        .expect("grid is non-empty");
    let row = args
        .scores
        .iter()
        .position(|&s| s == chart_score)
        .ok_or_else(|| CliError::invalid(format!("--chart-score {chart_score} is not among the swept scores")))?;
    let cells: Vec<&GridCell> = (0..args.ious.len()).map(|j| grid.get(row, j)).collect();
    let chart = precision_recall_chart(
        &format!("Precision and recall vs IoU (score ≥ {chart_score})"),
        &args.ious,
        &cells.iter().map(|c| c.metrics.precision).collect::<Vec<_>>(),
        &cells.iter().map(|c| c.metrics.recall).collect::<Vec<_>>(),
    );

    let summary = SweepSummary {
        images: dataset.images.len(),
        score_thresholds: &args.scores,
        iou_thresholds: &args.ious,
        best,
    };
    let mut record = RunRecord::new("sweep");
    record.input(&args.input);
    record.write(&args.out.join("grid.csv"), &grid_csv(&grid))?;
    record.write(&args.out.join("sweep.json"), &to_json(&summary))?;
    record.write(&args.out.join("pr_vs_iou.svg"), chart.as_bytes())?;
    record.finish(args, &manifest_in(&args.out))
}
