//! Synthetic micrographs with exact ground truth.
//!
//! Defects are drawn dark on a bright background with 4×4 supersampled
//! coverage, then blurred and corrupted with additive Gaussian noise. All
//! randomness comes from [`RNG_ALGORITHM`] seeded with the spec's `rng_seed`,
//! so a spec always renders to the same bits.

mod perturb;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DefectGeometry, EllipseFit};
use crate::imaging::gaussian_blur;
use crate::types::{BBox, DefectClass, GrayImage, GroundTruthLabel, NM_PER_PIXEL_RANGE};

pub use perturb::{perturb_detections, LabelOutcome, PerturbLog, PerturbParams};

/// Generator behind every random draw in this module: ChaCha with 8 rounds,
/// seeded through `SeedableRng::seed_from_u64`.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

/// Margin added around each ellipse's bounding rectangle for label boxes.
pub const LABEL_MARGIN_PX: f64 = 2.0;
/// Ring band width as a fraction of the semi-major axis...
pub const RING_WIDTH_FRACTION: f64 = 0.15;
/// ...but never thinner than this.
pub const MIN_RING_WIDTH_PX: f64 = 3.0;
/// Relative size of the inner ring of a double ring.
pub const INNER_RING_SCALE: f64 = 0.7;

const SUPERSAMPLE: usize = 4;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("spec violation: {0}")]
    SpecViolation(String),
}

type Band = ((f64, f64), (f64, f64));

fn violation(msg: impl Into<String>) -> SynthError {
    SynthError::SpecViolation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Morphology {
    SingleRing,
    DoubleRing,
    SolidEllipse,
    SolidDot,
}

impl Morphology {
    pub const ALL: [Morphology; 4] = [
        Morphology::SingleRing,
        Morphology::DoubleRing,
        Morphology::SolidEllipse,
        Morphology::SolidDot,
    ];

    pub fn class(self) -> DefectClass {
        match self {
            Morphology::SingleRing => DefectClass::Loop111,
            Morphology::DoubleRing | Morphology::SolidEllipse => DefectClass::Loop100,
            Morphology::SolidDot => DefectClass::BlackDot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSpec {
    pub morphology: Morphology,
    /// Ellipse center in pixel coordinates.
    pub center: [f64; 2],
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub theta: f64,
    /// Intensity removed at full coverage.
    pub depth: f64,
}

impl DefectSpec {
    pub fn ellipse(&self) -> EllipseFit {
        EllipseFit {
            cx: self.center[0],
            cy: self.center[1],
            a: self.a,
            b: self.b,
            theta: crate::geometry::normalize_angle(self.theta),
        }
    }

    pub fn ring_width(&self) -> f64 {
        (RING_WIDTH_FRACTION * self.a).max(MIN_RING_WIDTH_PX)
    }

    /// Dark bands as (outer semi-axes, inner semi-axes); a zero inner pair
    /// means a filled ellipse.
    fn bands(&self) -> Vec<Band> {
        let w = self.ring_width();
        let (a, b) = (self.a, self.b);
        match self.morphology {
            Morphology::SolidEllipse | Morphology::SolidDot => vec![((a, b), (0.0, 0.0))],
            Morphology::SingleRing => vec![((a, b), (a - w, b - w))],
            Morphology::DoubleRing => {
                let (ia, ib) = (INNER_RING_SCALE * a, INNER_RING_SCALE * b);
                vec![((a, b), (a - w, b - w)), ((ia, ib), (ia - w, ib - w))]
            }
        }
    }

    fn validate(&self, i: usize, background: f64) -> Result<(), SynthError> {
        let finite = self.center.iter().chain([&self.a, &self.b, &self.theta, &self.depth]).all(|v| v.is_finite());
        if !finite {
            return Err(violation(format!("defect {i}: non-finite parameter")));
        }
        if !(self.a >= self.b && self.b > 0.0) {
            return Err(violation(format!("defect {i}: need a >= b > 0, got a={}, b={}", self.a, self.b)));
        }
        if !(self.depth > 0.0 && self.depth <= background) {
            return Err(violation(format!(
                "defect {i}: depth {} outside (0, background_level={background}]",
                self.depth
            )));
        }
        let w = self.ring_width();
        match self.morphology {
            Morphology::SolidDot if self.a != self.b => {
                return Err(violation(format!("defect {i}: solid_dot needs a == b")));
            }
            Morphology::SingleRing if self.b - w < 1.0 => {
                return Err(violation(format!("defect {i}: ring of width {w:.2} px leaves no hole (b={})", self.b)));
            }
            Morphology::DoubleRing if (1.0 - INNER_RING_SCALE) * self.b - w < 1.0 || INNER_RING_SCALE * self.b - w < 1.0 => {
                return Err(violation(format!(
                    "defect {i}: double ring of width {w:.2} px does not fit in b={}",
                    self.b
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub nm_per_pixel: f64,
    pub background_level: f64,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
    pub defects: Vec<DefectSpec>,
    pub rng_seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(violation("canvas must be non-empty"));
        }
        let (lo, hi) = NM_PER_PIXEL_RANGE;
        if !(lo..=hi).contains(&self.nm_per_pixel) {
            return Err(violation(format!("nm_per_pixel {} outside [{lo}, {hi}]", self.nm_per_pixel)));
        }
        if !(0.0..=1.0).contains(&self.background_level) {
            return Err(violation("background_level outside [0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.noise_sigma) {
            return Err(violation("noise_sigma outside [0, 0.5]"));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(violation("blur_sigma must be >= 0"));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (i, d) in self.defects.iter().enumerate() {
            d.validate(i, self.background_level)?;
            let (hx, hy) = d.ellipse().half_extents();
            let [cx, cy] = d.center;
            if cx - hx < 0.0 || cy - hy < 0.0 || cx + hx > w || cy + hy > h {
                return Err(violation(format!("defect {i} extends past the canvas")));
            }
        }
        for i in 0..self.defects.len() {
            for j in i + 1..self.defects.len() {
                let (p, q) = (&self.defects[i], &self.defects[j]);
                let dist = (p.center[0] - q.center[0]).hypot(p.center[1] - q.center[1]);
                // Half the summed major axes (2a each).
                if dist < p.a + q.a {
                    return Err(violation(format!("defects {i} and {j} overlap: centers {dist:.2} px apart")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: GrayImage,
    pub labels: Vec<GroundTruthLabel>,
    pub geometry: Vec<DefectGeometry>,
}

/// Label box: the ellipse's bounding rectangle plus margin, clipped to the canvas.
pub fn label_box(e: &EllipseFit, width: usize, height: usize) -> BBox {
    let (hx, hy) = e.half_extents();
    let m = LABEL_MARGIN_PX;
    BBox::new(
        (e.cx - hx - m).max(0.0),
        (e.cy - hy - m).max(0.0),
        (e.cx + hx + m).min(width as f64),
        (e.cy + hy + m).min(height as f64),
    )
    .expect("validated ellipse has positive extent inside the canvas")
}

/// Fraction of pixel `(x, y)` covered by `d`'s dark bands.
fn coverage(d: &DefectSpec, bands: &[Band], x: usize, y: usize) -> f64 {
    let (s, c) = d.theta.sin_cos();
    let inside = |u: f64, v: f64, (a, b): (f64, f64)| a > 0.0 && (u / a).powi(2) + (v / b).powi(2) <= 1.0;
    let mut hits = 0usize;
    for j in 0..SUPERSAMPLE {
        for i in 0..SUPERSAMPLE {
            let px = x as f64 + (i as f64 + 0.5) / SUPERSAMPLE as f64 - d.center[0];
            let py = y as f64 + (j as f64 + 0.5) / SUPERSAMPLE as f64 - d.center[1];
            let (u, v) = (px * c + py * s, -px * s + py * c);
            if bands.iter().any(|&(outer, inner)| inside(u, v, outer) && !inside(u, v, inner)) {
                hits += 1;
            }
        }
    }
    hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut pixels = vec![spec.background_level; w * h];
    for d in &spec.defects {
        let bands = d.bands();
        let e = d.ellipse();
        let (hx, hy) = e.half_extents();
        let x0 = (e.cx - hx - 1.0).floor().max(0.0) as usize;
        let y0 = (e.cy - hy - 1.0).floor().max(0.0) as usize;
        let x1 = ((e.cx + hx + 1.0).ceil() as usize).min(w);
        let y1 = ((e.cy + hy + 1.0).ceil() as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let cov = coverage(d, &bands, x, y);
                if cov > 0.0 {
                    pixels[y * w + x] -= d.depth * cov;
                }
            }
        }
    }
    let mut image = GrayImage::from_raw_clamped(w, h, pixels, None);
    if spec.blur_sigma > 0.0 {
        image = gaussian_blur(&image, spec.blur_sigma);
    }
    if spec.noise_sigma > 0.0 {
        let mut r = rng(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        let noisy: Vec<f64> = image.pixels().iter().map(|&p| p + normal.sample(&mut r)).collect();
        image = GrayImage::from_raw_clamped(w, h, noisy, None);
    }
    let image = image
        .with_scale(Some(spec.nm_per_pixel))
        .map_err(|e| violation(e.to_string()))?;

    let mut labels = Vec::with_capacity(spec.defects.len());
    let mut geometry = Vec::with_capacity(spec.defects.len());
    for d in &spec.defects {
        let class = d.morphology.class();
        let e = d.ellipse();
        labels.push(GroundTruthLabel { class, bbox: label_box(&e, w, h) });
        geometry.push(DefectGeometry::new(class, e, Some(spec.nm_per_pixel)));
    }
    Ok(Scene { image, labels, geometry })
}

/// Recipe for [`random_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSceneConfig {
    pub width: usize,
    pub height: usize,
    pub nm_per_pixel: f64,
    pub background_level: f64,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
    /// Number of defects per morphology, in [`Morphology::ALL`] order.
    pub counts: [usize; 4],
    /// Range of the semi-major axis in pixels.
    pub a_range: (f64, f64),
    /// Range of the depth as a fraction of the background level.
    pub depth_range: (f64, f64),
}

impl Default for RandomSceneConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            nm_per_pixel: 0.5,
            background_level: 0.8,
            noise_sigma: 0.03,
            blur_sigma: 1.0,
            counts: [2, 2, 2, 2],
            a_range: (8.0, 20.0),
            depth_range: (0.4, 0.7),
        }
    }
}

/// Smallest semi-major axis at which each morphology can be drawn at the
/// aspect ratios [`random_scene`] uses.
pub fn min_semi_major(m: Morphology) -> f64 {
    match m {
        Morphology::SingleRing => 7.0,
        Morphology::DoubleRing => 16.0,
        Morphology::SolidEllipse | Morphology::SolidDot => 3.0,
    }
}

/// Places defects uniformly at random without overlap. The result can be fed
/// straight to [`generate_scene`].
pub fn random_scene(config: &RandomSceneConfig, seed: u64) -> Result<SceneSpec, SynthError> {
    const ATTEMPTS: usize = 2000;
    let mut r = rng(seed);
    let mut defects: Vec<DefectSpec> = Vec::new();
    let (a_lo, a_hi) = config.a_range;
    if !(a_lo > 0.0 && a_lo <= a_hi) {
        return Err(violation("a_range must satisfy 0 < min <= max"));
    }
    let (d_lo, d_hi) = config.depth_range;
    if !(d_lo > 0.0 && d_lo <= d_hi && d_hi <= 1.0) {
        return Err(violation("depth_range must lie in (0, 1]"));
    }
    for (m, &count) in Morphology::ALL.iter().zip(&config.counts) {
        for k in 0..count {
            let lo = a_lo.max(min_semi_major(*m));
            let hi = a_hi.max(lo);
            let mut placed = false;
            for _ in 0..ATTEMPTS {
                let a = r.random_range(lo..=hi);
                let (b, theta) = match m {
                    Morphology::SolidDot => (a, 0.0),
                    Morphology::SingleRing => (a * r.random_range(0.75..=1.0), r.random_range(0.0..std::f64::consts::PI)),
                    Morphology::DoubleRing => (a * r.random_range(0.85..=1.0), r.random_range(0.0..std::f64::consts::PI)),
                    Morphology::SolidEllipse => (a * r.random_range(0.5..=1.0), r.random_range(0.0..std::f64::consts::PI)),
                };
                let depth = config.background_level * r.random_range(d_lo..=d_hi);
                let cx = r.random_range(0.0..config.width as f64);
                let cy = r.random_range(0.0..config.height as f64);
                let d = DefectSpec { morphology: *m, center: [cx, cy], a, b, theta, depth };
                let (hx, hy) = d.ellipse().half_extents();
                let inside = cx - hx - LABEL_MARGIN_PX >= 0.0
                    && cy - hy - LABEL_MARGIN_PX >= 0.0
                    && cx + hx + LABEL_MARGIN_PX <= config.width as f64
                    && cy + hy + LABEL_MARGIN_PX <= config.height as f64;
                let apart = defects
                    .iter()
                    .all(|o| (o.center[0] - cx).hypot(o.center[1] - cy) >= o.a + a);
                if inside && apart && d.validate(0, config.background_level).is_ok() {
                    defects.push(d);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(violation(format!("could not place {m:?} #{k} without overlap")));
            }
        }
    }
    Ok(SceneSpec {
        width: config.width,
        height: config.height,
        nm_per_pixel: config.nm_per_pixel,
        background_level: config.background_level,
        noise_sigma: config.noise_sigma,
        blur_sigma: config.blur_sigma,
        defects,
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn clean(defects: Vec<DefectSpec>) -> SceneSpec {
        SceneSpec {
            width: 128,
            height: 96,
            nm_per_pixel: 1.0,
            background_level: 0.9,
            noise_sigma: 0.0,
            blur_sigma: 0.0,
            defects,
            rng_seed: 1,
        }
    }

    fn disk(cx: f64, cy: f64, r: f64) -> DefectSpec {
        DefectSpec { morphology: Morphology::SolidDot, center: [cx, cy], a: r, b: r, theta: 0.0, depth: 0.9 }
    }

    #[test]
    fn deterministic() {
        let spec = random_scene(&RandomSceneConfig::default(), 42).unwrap();
        assert_eq!(spec, random_scene(&RandomSceneConfig::default(), 42).unwrap());
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a, b);
        let other = generate_scene(&SceneSpec { rng_seed: 43, ..spec }).unwrap();
        assert_ne!(a.image, other.image);
    }

    #[test]
    fn label_counts_follow_morphology() {
        let config = RandomSceneConfig { counts: [5, 0, 0, 3], ..Default::default() };
        let scene = generate_scene(&random_scene(&config, 7).unwrap()).unwrap();
        let count = |c| scene.labels.iter().filter(|l| l.class == c).count();
        assert_eq!((count(DefectClass::Loop111), count(DefectClass::BlackDot)), (5, 3));
        assert_eq!(count(DefectClass::Loop100), 0);
        for l in &scene.labels {
            assert!(l.bbox.is_within(256.0, 256.0));
        }
    }

    #[test]
    fn disk_area() {
        for r in [3.0, 6.5, 12.0, 20.0] {
            let scene = generate_scene(&clean(vec![disk(50.3, 47.7, r)])).unwrap();
            let dark: f64 = scene.image.pixels().iter().map(|p| (0.9 - p) / 0.9).sum();
            let hard = scene.image.pixels().iter().filter(|&&p| p < 0.45).count() as f64;
            let truth = PI * r * r;
            assert!((dark - truth).abs() < 0.5, "coverage {dark} vs {truth}");
            assert!((hard - truth).abs() <= 4.0 * r, "pixels {hard} vs {truth}");
        }
    }

    #[test]
    fn ring_has_a_hole() {
        let ring = DefectSpec { morphology: Morphology::SingleRing, center: [40.0, 40.0], a: 15.0, b: 12.0, theta: 0.3, depth: 0.6 };
        let scene = generate_scene(&clean(vec![ring])).unwrap();
        assert_eq!(scene.image.get(40, 40), 0.9);
        let e = ring.ellipse();
        let (x, y) = e.point_at(0.0);
        // Just inside the outer edge along the major axis.
        let (s, c) = e.theta.sin_cos();
        let (x, y) = (x - 1.0 * c, y - 1.0 * s);
        assert!(scene.image.get(x as usize, y as usize) < 0.5);
    }

    #[test]
    fn spec_violations() {
        let overlap = clean(vec![disk(30.0, 30.0, 5.0), disk(38.0, 30.0, 5.0)]);
        assert!(matches!(generate_scene(&overlap), Err(SynthError::SpecViolation(_))));
        assert!(generate_scene(&clean(vec![disk(3.0, 30.0, 5.0)])).is_err());
        let mut oval = disk(30.0, 30.0, 5.0);
        oval.b = 4.0;
        assert!(generate_scene(&clean(vec![oval])).is_err());
        let thin = DefectSpec { morphology: Morphology::SingleRing, center: [40.0, 40.0], a: 6.0, b: 3.5, theta: 0.0, depth: 0.5 };
        assert!(generate_scene(&clean(vec![thin])).is_err());
    }

    #[test]
    fn geometry_is_the_generating_ellipse() {
        let spec = random_scene(&RandomSceneConfig::default(), 3).unwrap();
        let scene = generate_scene(&spec).unwrap();
        for (d, g) in spec.defects.iter().zip(&scene.geometry) {
            assert_eq!((g.ellipse.a, g.ellipse.b, g.ellipse.cx), (d.a, d.b, d.center[0]));
            assert_eq!(g.class, d.morphology.class());
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = random_scene(&RandomSceneConfig::default(), 9).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"single_ring\""));
        let back: SceneSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_labels_stay_inside(seed in any::<u64>(), size in 96usize..160) {
            let config = RandomSceneConfig { width: size, height: size, counts: [1, 1, 1, 1], ..Default::default() };
            let spec = random_scene(&config, seed).unwrap();
            let scene = generate_scene(&spec).unwrap();
            prop_assert_eq!(scene.labels.len(), 4);
            for l in &scene.labels {
                prop_assert!(l.bbox.area() > 0.0);
                prop_assert!(l.bbox.is_within(size as f64, size as f64));
            }
            prop_assert_eq!(generate_scene(&spec).unwrap(), scene);
        }
    }
}
