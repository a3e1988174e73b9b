use std::path::{Path, PathBuf};

use defectometer_core::geometry::DefectGeometry;
use serde::Serialize;

use crate::error::CliError;
use crate::files::{load_sorted, manifest_beside, to_json, RunRecord};
use crate::geometry_csv::read_csv;
use crate::report::{build, check_units, total_area, Units};

#[derive(clap::Args, Serialize)]
#[command(group(clap::ArgGroup::new("area").required(true).args(["input", "area_m2"])))]
pub struct Args {
    /// Geometry CSV of the predicted (or only) defect set.
    #[arg(long)]
    pub geometry: PathBuf,
    /// Geometry CSV of the ground truth; enables relative errors.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Annotation JSON whose images make up the imaged area.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Imaged area in m², instead of --in.
    #[arg(long)]
    pub area_m2: Option<f64>,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn geoms(path: &Path) -> Result<Vec<DefectGeometry>, CliError> {
    Ok(read_csv(path)?.into_iter().map(|(_, g)| g).collect())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let mut record = RunRecord::new("stats");
    let (area, units) = match (&args.input, args.area_m2) {
        (Some(p), _) => {
            record.input(p);
            total_area(&load_sorted(p)?)?
        }
        (None, Some(a)) if a > 0.0 && a.is_finite() => (a, Units::Nm),
        (None, Some(a)) => return Err(CliError::invalid(format!("--area-m2 must be positive, got {a}"))),
        (None, None) => unreachable!("clap requires one of --in / --area-m2"),
    };
    record.input(&args.geometry);
    let predicted = geoms(&args.geometry)?;
    check_units(&predicted, units, &args.geometry.display().to_string())?;
    let truth = match &args.truth {
        Some(p) => {
            record.input(p);
            let t = geoms(p)?;
            check_units(&t, units, &p.display().to_string())?;
            Some(t)
        }
        None => None,
    };
    let report = build(truth.as_deref(), &predicted, area, units)?;
    record.write(&args.out, &to_json(&report))?;
    record.finish(args, &manifest_beside(&args.out))
}
