//! Per-defect geometry table.
//!
//! Columns: `image_id,class,cx,cy,a_px,b_px,theta_rad,diameter_nm,area_nm2,fit_status`.
//! Failed fits keep their row with empty numbers and the failure in
//! `fit_status`; images without a scale leave the nm columns empty.

use std::path::Path;

use defectometer_core::geometry::{diameter_of, DefectGeometry, EllipseFit};
use defectometer_core::DefectClass;

use crate::error::CliError;

pub const HEADER: [&str; 10] = [
    "image_id", "class", "cx", "cy", "a_px", "b_px", "theta_rad", "diameter_nm", "area_nm2", "fit_status",
];

pub const STATUS_OK: &str = "ok";

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryRow {
    pub image_id: String,
    pub class: DefectClass,
    pub fit: Result<DefectGeometry, String>,
}

pub fn to_csv(rows: &[GeometryRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for row in rows {
        let mut rec = vec![row.image_id.clone(), row.class.to_string()];
        match &row.fit {
            Ok(g) => {
                let e = &g.ellipse;
                rec.extend([e.cx, e.cy, e.a, e.b, e.theta].map(|v| v.to_string()));
                match g.nm_per_pixel {
                    Some(_) => rec.extend([g.diameter.to_string(), g.area.to_string()]),
                    None => rec.extend([String::new(), String::new()]),
                }
                rec.push(STATUS_OK.to_string());
            }
            Err(status) => {
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(status.clone());
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a geometry table back into successful fits; failed rows are skipped.
///
/// The scale is recovered from the nm diameter column, so rows written for
/// unscaled images come back in pixel units.
pub fn read_csv(path: &Path) -> Result<Vec<(String, DefectGeometry)>, CliError> {
    let text = crate::files::read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(CliError::invalid(format!(
            "{}: expected header {}",
            path.display(),
            HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let bad = |msg: String| CliError::invalid(format!("{} line {line}: {msg}", path.display()));
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if &rec[9] != STATUS_OK {
            continue;
        }
        let class: DefectClass = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
        let num = |k: usize| -> Result<f64, CliError> {
            rec[k].parse::<f64>().map_err(|_| bad(format!("column {} is not a number: {:?}", HEADER[k], &rec[k])))
        };
        let e = EllipseFit::new(num(2)?, num(3)?, num(4)?, num(5)?, num(6)?)
            .map_err(|e| bad(e.to_string()))?;
        let scale = if rec[7].is_empty() {
            None
        } else {
            Some(num(7)? / diameter_of(&e, class, None))
        };
        out.push((rec[0].to_string(), DefectGeometry::new(class, e, scale)));
    }
    Ok(out)
}
