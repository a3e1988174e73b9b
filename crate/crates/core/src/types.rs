//! Shared domain types: images, boxes, defect classes, labels and detections.
//!
//! Coordinates are image pixels with x rightward and y downward, origin at the
//! top-left corner. Boxes are half-open: `[x_min, x_max) × [y_min, y_max)`, so
//! an integer box `[0, 0, 2, 2]` covers exactly four pixels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accepted range for the physical pixel scale.
pub const NM_PER_PIXEL_RANGE: (f64, f64) = (0.01, 100.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("pixel {index} has intensity {value}, outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },
    #[error("nm_per_pixel {0} outside the accepted range [0.01, 100]")]
    ScaleOutOfRange(f64),
    #[error("box [{0}, {1}, {2}, {3}] does not have positive area")]
    NonPositiveBox(f64, f64, f64, f64),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("unknown defect class {0:?}")]
    UnknownClass(String),
    #[error("composite channels have mismatched dimensions")]
    ChannelMismatch,
}

/// Single-channel micrograph with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    nm_per_pixel: Option<f64>,
}

impl GrayImage {
    /// Builds an image from a row-major buffer, validating every invariant.
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<f64>,
        nm_per_pixel: Option<f64>,
    ) -> Result<Self, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::EmptyImage { width, height });
        }
        if pixels.len() != width * height {
            return Err(TypeError::BufferSize {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(TypeError::IntensityOutOfRange { index, value });
        }
        if let Some(scale) = nm_per_pixel {
            check_scale(scale)?;
        }
        Ok(Self {
            width,
            height,
            pixels,
            nm_per_pixel,
        })
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, TypeError> {
        Self::new(width, height, vec![value; width * height], None)
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel. Values are
    /// clamped into `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, TypeError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, pixels, None)
    }

    /// Internal constructor for filters whose output is in range by construction.
    pub(crate) fn from_raw_clamped(
        width: usize,
        height: usize,
        mut pixels: Vec<f64>,
        nm_per_pixel: Option<f64>,
    ) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        for p in &mut pixels {
            *p = p.clamp(0.0, 1.0);
        }
        Self {
            width,
            height,
            pixels,
            nm_per_pixel,
        }
    }

    pub fn with_scale(mut self, nm_per_pixel: Option<f64>) -> Result<Self, TypeError> {
        if let Some(scale) = nm_per_pixel {
            check_scale(scale)?;
        }
        self.nm_per_pixel = nm_per_pixel;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn nm_per_pixel(&self) -> Option<f64> {
        self.nm_per_pixel
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Photometric inversion `1 - v`.
    pub fn inverted(&self) -> Self {
        Self {
            pixels: self.pixels.iter().map(|v| 1.0 - v).collect(),
            ..self.clone()
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Sample variance (n - 1 denominator).
    pub fn variance(&self) -> f64 {
        let n = self.pixels.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        self.pixels.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

fn check_scale(scale: f64) -> Result<(), TypeError> {
    let (lo, hi) = NM_PER_PIXEL_RANGE;
    if scale.is_finite() && (lo..=hi).contains(&scale) {
        Ok(())
    } else {
        Err(TypeError::ScaleOutOfRange(scale))
    }
}

/// Three-plane composite fed to the detector: raw, contrast-enhanced, blurred.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeImage {
    pub red: GrayImage,
    pub green: GrayImage,
    pub blue: GrayImage,
}

impl CompositeImage {
    pub fn new(red: GrayImage, green: GrayImage, blue: GrayImage) -> Result<Self, TypeError> {
        let dims = (red.width(), red.height());
        if (green.width(), green.height()) != dims || (blue.width(), blue.height()) != dims {
            return Err(TypeError::ChannelMismatch);
        }
        Ok(Self { red, green, blue })
    }

    pub fn width(&self) -> usize {
        self.red.width()
    }

    pub fn height(&self) -> usize {
        self.red.height()
    }
}

/// Axis-aligned half-open box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, TypeError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if finite && x_min < x_max && y_min < y_max {
            Ok(Self {
                x_min,
                y_min,
                x_max,
                y_max,
            })
        } else {
            Err(TypeError::NonPositiveBox(x_min, y_min, x_max, y_max))
        }
    }

    /// Builds a box from two arbitrary corners, ordering the coordinates.
    pub fn from_corners(p: (f64, f64), q: (f64, f64)) -> Result<Self, TypeError> {
        Self::new(p.0.min(q.0), p.1.min(q.1), p.0.max(q.0), p.1.max(q.1))
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    /// Area of the overlap with `other`; zero when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Intersection with `[0, width) × [0, height)`, or `None` if empty.
    pub fn clipped(&self, width: f64, height: f64) -> Option<BBox> {
        BBox::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(width),
            self.y_max.min(height),
        )
        .ok()
    }

    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = TypeError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// The three-way defect taxonomy.
///
/// Visual morphologies collapse onto classes as follows: open single-ring
/// ellipses are `Loop111`; open double rings and closed solid ellipses are
/// `Loop100`; closed circular solid dots are `BlackDot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectClass {
    Loop111,
    Loop100,
    #[serde(rename = "blackdot")]
    BlackDot,
}

impl DefectClass {
    pub const ALL: [DefectClass; 3] = [DefectClass::Loop111, DefectClass::Loop100, DefectClass::BlackDot];

    pub fn index(self) -> usize {
        match self {
            DefectClass::Loop111 => 0,
            DefectClass::Loop100 => 1,
            DefectClass::BlackDot => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DefectClass::Loop111 => "loop111",
            DefectClass::Loop100 => "loop100",
            DefectClass::BlackDot => "blackdot",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectClass {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loop111" => Ok(DefectClass::Loop111),
            "loop100" => Ok(DefectClass::Loop100),
            "blackdot" => Ok(DefectClass::BlackDot),
            other => Err(TypeError::UnknownClass(other.to_string())),
        }
    }
}

/// Human-labeled defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub class: DefectClass,
    pub bbox: BBox,
}

/// Detector output: a box, its predicted class and a confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: DefectClass,
    pub bbox: BBox,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BBox, class: DefectClass, score: f64) -> Result<Self, TypeError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(TypeError::ScoreOutOfRange(score));
        }
        Ok(Self { class, bbox, score })
    }
}
