use std::path::PathBuf;

use defectometer_core::eval::{
    evaluate, ClassMetrics, ConfusionMatrix, ImageEval, DEFAULT_IOU_THRESHOLD, DEFAULT_SCORE_THRESHOLD,
};
use defectometer_core::{DefectClass, Dataset};
use serde::Serialize;

use super::check_unit_interval;
use crate::error::CliError;
use crate::files::{load_sorted, manifest_in, to_json, RunRecord};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Annotation JSON holding both labels and detections.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for metrics.json and confusion.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SCORE_THRESHOLD)]
    pub score_thr: f64,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub iou_thr: f64,
}

#[derive(Serialize)]
struct ConfusionReport {
    classes: [DefectClass; 3],
    /// Rows are predicted classes, columns human labels.
    counts: [[u64; 3]; 3],
    /// Each row as a percentage of its total; null for empty rows.
    row_percentages: [[Option<f64>; 3]; 3],
    per_class: [ClassMetrics; 3],
}

#[derive(Serialize)]
struct MetricsReport {
    images: usize,
    score_threshold: f64,
    iou_threshold: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    confusion: ConfusionReport,
}

pub fn image_evals(dataset: &Dataset) -> Vec<ImageEval<'_>> {
    dataset
        .images
        .iter()
        .map(|img| ImageEval { detections: &img.detections, labels: &img.labels })
        .collect()
}

fn confusion_csv(cm: &ConfusionMatrix) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["predicted", "labeled", "count", "row_percent"]).expect("in-memory write");
    let pct = cm.row_percentages();
    for p in DefectClass::ALL {
        for l in DefectClass::ALL {
            let share = pct[p.index()][l.index()].map(|v| v.to_string()).unwrap_or_default();
            w.write_record([p.as_str(), l.as_str(), &cm.counts[p.index()][l.index()].to_string(), &share])
                .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn run(args: &Args) -> Result<(), CliError> {
    check_unit_interval("--score-thr", args.score_thr)?;
    check_unit_interval("--iou-thr", args.iou_thr)?;
    let dataset = load_sorted(&args.input)?;
    let ev = evaluate(&image_evals(&dataset), args.score_thr, args.iou_thr);
    let m = ev.metrics;
    log::info!("precision {:.4} recall {:.4} f1 {:.4}", m.precision, m.recall, m.f1);
    let report = MetricsReport {
        images: dataset.images.len(),
        score_threshold: args.score_thr,
        iou_threshold: args.iou_thr,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        confusion: ConfusionReport {
            classes: DefectClass::ALL,
            counts: ev.confusion.counts,
            row_percentages: ev.confusion.row_percentages(),
            per_class: ev.confusion.per_class(),
        },
    };

    let mut record = RunRecord::new("evaluate");
    record.input(&args.input);
    record.write(&args.out.join("metrics.json"), &to_json(&report))?;
    record.write(&args.out.join("confusion.csv"), &confusion_csv(&ev.confusion))?;
    record.finish(args, &manifest_in(&args.out))
}
