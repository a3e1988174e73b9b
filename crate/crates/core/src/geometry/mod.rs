//! Per-box defect geometry: segmentation, ellipse fitting and the physical
//! diameter/area of each defect.

mod ellipse;
mod morphology;
mod segment;
mod watershed;

pub use ellipse::{
    angle_distance, conic_to_ellipse, ellipse_to_conic, fit_ellipse, normalize_angle, Conic,
    EllipseFit,
};
pub use morphology::{distance_transform, SegmentationMask};
pub use segment::{
    normalize_polarity, otsu_threshold, segment_defect, segment_defect_with, SegmentParams,
    MIN_PATCH_SIDE,
};
pub use watershed::watershed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{crop, ImagingError};
use crate::types::{BBox, DefectClass, GrayImage};

/// Crop padding as a fraction of the larger box side.
pub const CROP_PAD_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("no foreground: {0}")]
    NoForeground(&'static str),
    #[error("patch {width}x{height} is smaller than 8x8")]
    PatchTooSmall { width: usize, height: usize },
    #[error("degenerate ellipse fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

impl GeometryError {
    /// Short machine-readable status for reports.
    pub fn status(&self) -> &'static str {
        match self {
            GeometryError::NoForeground(_) => "no_foreground",
            GeometryError::PatchTooSmall { .. } => "patch_too_small",
            GeometryError::DegenerateFit(_) => "degenerate_fit",
            GeometryError::Imaging(_) => "crop_failed",
        }
    }
}

/// Fitted geometry of one defect.
///
/// `diameter` and `area` are in nm and nm² when `nm_per_pixel` is known and
/// in pixels otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectGeometry {
    pub class: DefectClass,
    pub ellipse: EllipseFit,
    pub nm_per_pixel: Option<f64>,
    pub diameter: f64,
    pub area: f64,
}

impl DefectGeometry {
    pub fn new(class: DefectClass, ellipse: EllipseFit, nm_per_pixel: Option<f64>) -> Self {
        let s = nm_per_pixel.unwrap_or(1.0);
        Self {
            class,
            ellipse,
            nm_per_pixel,
            diameter: diameter_of(&ellipse, class, nm_per_pixel),
            area: ellipse.area() * s * s,
        }
    }
}

/// Loops use the major axis `2a`; black dots the equal-area circle `2√(ab)`.
pub fn diameter_of(e: &EllipseFit, class: DefectClass, nm_per_pixel: Option<f64>) -> f64 {
    let px = match class {
        DefectClass::Loop111 | DefectClass::Loop100 => 2.0 * e.a,
        DefectClass::BlackDot => 2.0 * (e.a * e.b).sqrt(),
    };
    px * nm_per_pixel.unwrap_or(1.0)
}

/// Segments and fits the defect inside `bbox`.
///
/// For ring-shaped defects the outer contour is fitted: holes in the
/// segmented region are filled before the boundary is traced.
pub fn analyze_defect(
    img: &GrayImage,
    bbox: &BBox,
    class: DefectClass,
) -> Result<DefectGeometry, GeometryError> {
    analyze_defect_with(img, bbox, class, &SegmentParams::default())
}

pub fn analyze_defect_with(
    img: &GrayImage,
    bbox: &BBox,
    class: DefectClass,
    params: &SegmentParams,
) -> Result<DefectGeometry, GeometryError> {
    let pad = CROP_PAD_FRACTION * bbox.width().max(bbox.height());
    let patch = crop(img, bbox, pad)?;
    let mask = segment_defect_with(&patch.image, params)?;
    let outline = mask.largest_component().fill_holes();
    let local = fit_trimmed(&outline.boundary_points())?;
    let ellipse = EllipseFit {
        cx: local.cx + patch.offset_x as f64,
        cy: local.cy + patch.offset_y as f64,
        ..local
    };
    Ok(DefectGeometry::new(class, ellipse, img.nm_per_pixel()))
}

/// Refits without boundary points far from the previous fit, so that a
/// neighbor merged into the outline does not drag the ellipse along.
fn fit_trimmed(points: &[(f64, f64)]) -> Result<EllipseFit, GeometryError> {
    const ROUNDS: usize = 3;
    let mut fit = fit_ellipse(points)?;
    let mut kept: Vec<(f64, f64)> = points.to_vec();
    for _ in 0..ROUNDS {
        // Radial offset in pixels, measured along the minor axis scale.
        let resid: Vec<f64> = points
            .iter()
            .map(|&(x, y)| (fit.normalized_radius(x, y) - 1.0).abs() * fit.b)
            .collect();
        let mut sorted = resid.clone();
        sorted.sort_by(f64::total_cmp);
        let cutoff = (3.0 * sorted[sorted.len() / 2]).max(1.5);
        let next: Vec<(f64, f64)> = points
            .iter()
            .zip(&resid)
            .filter(|(_, &r)| r <= cutoff)
            .map(|(&p, _)| p)
            .collect();
        if next.len() == kept.len() || next.len() < points.len() / 2 || next.len() < 5 {
            break;
        }
        match fit_ellipse(&next) {
            Ok(f) => fit = f,
            Err(_) => break,
        }
        kept = next;
    }
    Ok(fit)
}
