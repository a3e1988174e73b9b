//! Per-patch defect segmentation.
//!
//! Markers are built with Otsu thresholding, a 3×3 cross opening, a distance
//! transform (sure foreground at half of each blob's maximum distance) and a
//! dilated sure-background zone. Regions are then grown by watershed flooding of the
//! smoothed gradient magnitude, so region borders settle on intensity edges.

use super::morphology::{distance_transform, SegmentationMask};
use super::watershed::watershed;
use super::GeometryError;
use crate::imaging::{gaussian_blur, reflect};
use crate::types::GrayImage;

/// Smallest patch side accepted by [`segment_defect`].
pub const MIN_PATCH_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Sure foreground is `distance >= fraction * max distance`, the maximum
    /// taken per connected foreground blob.
    pub sure_fg_fraction: f64,
    /// Square dilations of the opened foreground bounding sure background.
    pub background_dilations: usize,
    /// Minimum Otsu effectiveness (between-class over total variance) of the
    /// smoothed patch. A unimodal Gaussian histogram scores about 0.64.
    pub min_separability: f64,
    /// Gaussian smoothing applied before thresholding and taking the gradient.
    pub gradient_sigma: f64,
    /// Margin, as a fraction of each side, left out of the threshold
    /// histogram so that neighbors caught in the crop padding do not set it.
    pub histogram_margin: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            sure_fg_fraction: 0.5,
            background_dilations: 3,
            min_separability: 0.75,
            gradient_sigma: 1.0,
            histogram_margin: super::CROP_PAD_FRACTION / (1.0 + 2.0 * super::CROP_PAD_FRACTION),
        }
    }
}

/// Otsu threshold over a 256-bin histogram spanning the data range, with
/// its effectiveness `σ_B² / σ_T²`. `None` for constant input.
pub fn otsu_threshold(values: &[f64]) -> Option<(f64, f64)> {
    const BINS: usize = 256;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-9) {
        return None;
    }
    let width = (hi - lo) / BINS as f64;
    let mut hist = [0.0f64; BINS];
    for &v in values {
        hist[(((v - lo) / width) as usize).min(BINS - 1)] += 1.0;
    }
    let n = values.len() as f64;
    let center = |i: usize| lo + (i as f64 + 0.5) * width;
    let total_mean = hist.iter().enumerate().map(|(i, c)| c * center(i)).sum::<f64>() / n;
    let total_var = hist
        .iter()
        .enumerate()
        .map(|(i, c)| c * (center(i) - total_mean).powi(2))
        .sum::<f64>()
        / n;

    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (0usize, -1.0f64);
    for (i, &c) in hist.iter().enumerate().take(BINS - 1) {
        w0 += c;
        sum0 += c * center(i);
        let w1 = n - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (total_mean * n - sum0) / w1;
        let between = w0 * w1 * (m0 - m1).powi(2) / (n * n);
        if between > best.1 {
            best = (i, between);
        }
    }
    if best.1 < 0.0 || total_var <= 0.0 {
        return None;
    }
    Some((lo + (best.0 + 1) as f64 * width, best.1 / total_var))
}

/// Inverts the patch when its center is brighter than its border so that
/// defects are always dark afterwards.
pub fn normalize_polarity(patch: &GrayImage) -> GrayImage {
    let (w, h) = (patch.width(), patch.height());
    let ring = (w.min(h) / 10).max(1);
    let (mut center_sum, mut center_n) = (0.0, 0usize);
    let (mut border_sum, mut border_n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let v = patch.get(x, y);
            if (w / 4..w - w / 4).contains(&x) && (h / 4..h - h / 4).contains(&y) {
                center_sum += v;
                center_n += 1;
            }
            if x < ring || y < ring || x + ring >= w || y + ring >= h {
                border_sum += v;
                border_n += 1;
            }
        }
    }
    let center = center_sum / center_n.max(1) as f64;
    let border = border_sum / border_n.max(1) as f64;
    if center > border {
        patch.inverted()
    } else {
        patch.clone()
    }
}

fn sobel_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| img.get(reflect(x, w), reflect(y, h));
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Segments the defect at the center of `patch`.
pub fn segment_defect(patch: &GrayImage) -> Result<SegmentationMask, GeometryError> {
    segment_defect_with(patch, &SegmentParams::default())
}

pub fn segment_defect_with(
    patch: &GrayImage,
    params: &SegmentParams,
) -> Result<SegmentationMask, GeometryError> {
    let (w, h) = (patch.width(), patch.height());
    if w < MIN_PATCH_SIDE || h < MIN_PATCH_SIDE {
        return Err(GeometryError::PatchTooSmall { width: w, height: h });
    }
    let work = normalize_polarity(patch);
    // Thresholding the smoothed patch keeps thin structures separable from
    // pixel noise; smoothing leaves a unimodal histogram unimodal.
    let smooth = if params.gradient_sigma > 0.0 {
        gaussian_blur(&work, params.gradient_sigma)
    } else {
        work.clone()
    };

    let mx = (params.histogram_margin * w as f64) as usize;
    let my = (params.histogram_margin * h as f64) as usize;
    let window: Vec<f64> = (my..h - my)
        .flat_map(|y| (mx..w - mx).map(move |x| (x, y)))
        .map(|(x, y)| smooth.get(x, y))
        .collect();
    let (threshold, separability) =
        otsu_threshold(&window).ok_or(GeometryError::NoForeground("patch has no contrast"))?;
    if separability < params.min_separability {
        return Err(GeometryError::NoForeground("intensity histogram is not bimodal"));
    }
    let foreground = SegmentationMask::from_fn(w, h, |x, y| smooth.get(x, y) < threshold);
    let opened = foreground.open_cross();
    if opened.is_empty() {
        return Err(GeometryError::NoForeground("foreground vanished after opening"));
    }

    let dist = distance_transform(&opened)
        .ok_or(GeometryError::NoForeground("foreground fills the whole patch"))?;
    // Each blob is judged against its own deepest point, so a thick neighbor
    // cannot starve a thin ring of markers.
    let (blobs, n_blobs) = opened.label_components();
    let mut max_dist = vec![0.0f64; n_blobs as usize + 1];
    for (&b, &d) in blobs.iter().zip(&dist) {
        max_dist[b as usize] = max_dist[b as usize].max(d);
    }
    let sure_fg = SegmentationMask::from_fn(w, h, |x, y| {
        let i = y * w + x;
        blobs[i] > 0 && dist[i] >= params.sure_fg_fraction * max_dist[blobs[i] as usize]
    });
    let sure_bg = opened.dilate_square(params.background_dilations).complement();

    let (seed_labels, n_seeds) = sure_fg.label_components();
    let background = n_seeds + 1;
    let markers: Vec<u32> = seed_labels
        .iter()
        .zip(sure_bg.data())
        .map(|(&l, &bg)| if bg { background } else { l })
        .collect();
    let regions = watershed(&sobel_magnitude(&smooth), w, h, &markers);

    // Adjacent regions merge back into objects (a ring's arcs, say); keep the
    // objects that reach into the central quarter or enclose the center.
    let objects = SegmentationMask::from_fn(w, h, |x, y| regions[y * w + x] != background);
    let (comp, n_comp) = objects.label_components();
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize, false); n_comp as usize + 1];
    for y in 0..h {
        for x in 0..w {
            let c = comp[y * w + x] as usize;
            if c == 0 {
                continue;
            }
            let b = &mut bounds[c];
            *b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y), b.4);
            if (w / 4..w - w / 4).contains(&x) && (h / 4..h - h / 4).contains(&y) {
                b.4 = true;
            }
        }
    }
    let (mx, my) = (w / 2, h / 2);
    let keep: Vec<bool> = bounds
        .iter()
        .enumerate()
        .map(|(c, &(x0, y0, x1, y1, touches))| {
            c > 0 && (touches || (x0 <= mx && mx <= x1 && y0 <= my && my <= y1))
        })
        .collect();
    let mask = SegmentationMask::from_fn(w, h, |x, y| keep[comp[y * w + x] as usize]);
    if mask.is_empty() {
        return Err(GeometryError::NoForeground("no segmented region near the patch center"));
    }
    Ok(mask)
}
