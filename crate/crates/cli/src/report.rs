//! Per-class statistics report written by `stats` and `pipeline`.

use defectometer_core::geometry::DefectGeometry;
use defectometer_core::stats::{
    areal_density, class_summary, compare_reports, hardening_fractional_error, ClassSummary, DensityMode,
    ErrorPropagation,
};
use defectometer_core::{DefectClass, Dataset};
use serde::Serialize;

use crate::error::CliError;

/// Length unit of a set of geometries and images: nm with a scale, px without.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nm,
    Px,
}

impl Units {
    pub fn area_unit(self) -> &'static str {
        match self {
            Units::Nm => "m2",
            Units::Px => "px2",
        }
    }
}

/// Total imaged area in m² (scaled images) or px² (unscaled). Mixing the
/// two is rejected.
pub fn total_area(dataset: &Dataset) -> Result<(f64, Units), CliError> {
    let scaled = dataset.images.iter().filter(|i| i.nm_per_pixel.is_some()).count();
    if dataset.images.is_empty() {
        return Err(CliError::invalid("annotation file has no images"));
    }
    if scaled == dataset.images.len() {
        Ok((dataset.images.iter().filter_map(|i| i.area_m2()).sum(), Units::Nm))
    } else if scaled == 0 {
        Ok((dataset.images.iter().map(|i| (i.width * i.height) as f64).sum(), Units::Px))
    } else {
        Err(CliError::invalid(format!(
            "{scaled} of {} images have nm_per_pixel; statistics need all or none",
            dataset.images.len()
        )))
    }
}

pub fn check_units(geoms: &[DefectGeometry], units: Units, what: &str) -> Result<(), CliError> {
    let expect_scaled = units == Units::Nm;
    if geoms.iter().any(|g| g.nm_per_pixel.is_some() != expect_scaled) {
        return Err(CliError::invalid(format!(
            "{what}: geometry units do not match the {} area basis",
            units.area_unit()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct AreaFraction {
    pub ground_truth: Option<f64>,
    pub predicted: f64,
}

/// Fractional change of `A·√d` implied by the predicted mean diameter.
#[derive(Debug, Serialize)]
pub struct HardeningSensitivity {
    pub epsilon: f64,
    pub d: f64,
    pub linearized: f64,
    pub exact: f64,
}

#[derive(Debug, Serialize)]
pub struct ClassReport {
    pub class: DefectClass,
    pub ground_truth: Option<ClassSummary>,
    pub predicted: ClassSummary,
    pub diameter_error_pct: Option<f64>,
    pub density_error_pct: Option<f64>,
    pub area_fraction: AreaFraction,
    pub hardening: Option<HardeningSensitivity>,
}

#[derive(Debug, Default, Serialize)]
pub struct FitCounts {
    pub labels_ok: usize,
    pub labels_failed: usize,
    pub detections_ok: usize,
    pub detections_failed: usize,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub length_unit: Units,
    pub area_unit: &'static str,
    pub total_area: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fits: Option<FitCounts>,
    pub classes: Vec<ClassReport>,
}

fn class_fraction(geoms: &[DefectGeometry], class: DefectClass, area: f64) -> Result<f64, CliError> {
    let subset: Vec<DefectGeometry> = geoms.iter().filter(|g| g.class == class).copied().collect();
    Ok(areal_density(&subset, area, DensityMode::AreaFraction)?)
}

pub fn build(
    truth: Option<&[DefectGeometry]>,
    predicted: &[DefectGeometry],
    area: f64,
    units: Units,
) -> Result<Report, CliError> {
    let mut classes = Vec::with_capacity(3);
    match truth {
        Some(gt) => {
            let cmp = compare_reports(gt, predicted, area)?;
            for c in cmp.classes {
                let hardening = match (c.ground_truth.mean_diameter_nm, c.predicted.mean_diameter_nm) {
                    (Some(d), Some(p)) => {
                        let eps = p - d;
                        let lin = hardening_fractional_error(eps, d, ErrorPropagation::Linearized).ok();
                        let exact = hardening_fractional_error(eps, d, ErrorPropagation::Exact).ok();
                        lin.zip(exact).map(|(linearized, exact)| HardeningSensitivity { epsilon: eps, d, linearized, exact })
                    }
                    _ => None,
                };
                classes.push(ClassReport {
                    class: c.class,
                    ground_truth: Some(c.ground_truth),
                    predicted: c.predicted,
                    diameter_error_pct: c.diameter_error_pct,
                    density_error_pct: c.density_error_pct,
                    area_fraction: AreaFraction {
                        ground_truth: Some(class_fraction(gt, c.class, area)?),
                        predicted: class_fraction(predicted, c.class, area)?,
                    },
                    hardening,
                });
            }
        }
        None => {
            for class in DefectClass::ALL {
                classes.push(ClassReport {
                    class,
                    ground_truth: None,
                    predicted: class_summary(predicted, class, area)?,
                    diameter_error_pct: None,
                    density_error_pct: None,
                    area_fraction: AreaFraction { ground_truth: None, predicted: class_fraction(predicted, class, area)? },
                    hardening: None,
                });
            }
        }
    }
    Ok(Report {
        length_unit: units,
        area_unit: units.area_unit(),
        total_area: area,
        score_threshold: None,
        fits: None,
        classes,
    })
}
