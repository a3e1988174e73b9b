//! Contrast-limited adaptive histogram equalization.

use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::types::GrayImage;

/// CLAHE configuration. `clip_limit` is a fraction of each tile's pixel count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    pub clip_limit: f64,
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub bins: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 0.01,
            tile_rows: 8,
            tile_cols: 8,
            bins: 256,
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if !(self.clip_limit > 0.0 && self.clip_limit <= 1.0) {
            return Err(ImagingError::InvalidParameter(format!(
                "clip_limit {} outside (0, 1]",
                self.clip_limit
            )));
        }
        if self.tile_rows == 0 || self.tile_cols == 0 {
            return Err(ImagingError::InvalidParameter("tile grid must be at least 1x1".into()));
        }
        if self.bins < 2 {
            return Err(ImagingError::InvalidParameter("at least 2 histogram bins required".into()));
        }
        Ok(())
    }
}

/// Tile layout along one axis: integer boundaries and continuous centers.
struct Axis {
    bounds: Vec<usize>,
    centers: Vec<f64>,
}

impl Axis {
    fn new(len: usize, tiles: usize) -> Self {
        let bounds: Vec<usize> = (0..=tiles).map(|i| i * len / tiles).collect();
        let centers = bounds
            .windows(2)
            .map(|w| (w[0] + w[1]) as f64 / 2.0 - 0.5)
            .collect();
        Self { bounds, centers }
    }

    /// Neighboring tile indices and the weight of the second one.
    fn locate(&self, pos: f64) -> (usize, usize, f64) {
        let n = self.centers.len();
        if pos <= self.centers[0] {
            return (0, 0, 0.0);
        }
        if pos >= self.centers[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let i = self.centers.partition_point(|&c| c <= pos) - 1;
        let t = (pos - self.centers[i]) / (self.centers[i + 1] - self.centers[i]);
        (i, i + 1, t)
    }
}

pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage, ImagingError> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < params.tile_cols || h < params.tile_rows {
        return Err(ImagingError::ImageTooSmall {
            width: w,
            height: h,
            min_width: params.tile_cols,
            min_height: params.tile_rows,
        });
    }
    let bins = params.bins;
    let bin_of = |v: f64| ((v * bins as f64) as usize).min(bins - 1);

    let rows = Axis::new(h, params.tile_rows);
    let cols = Axis::new(w, params.tile_cols);

    // One lookup table per tile, row-major over the tile grid.
    let mut luts = Vec::with_capacity(params.tile_rows * params.tile_cols);
    for ty in 0..params.tile_rows {
        for tx in 0..params.tile_cols {
            let mut hist = vec![0.0f64; bins];
            for y in rows.bounds[ty]..rows.bounds[ty + 1] {
                for x in cols.bounds[tx]..cols.bounds[tx + 1] {
                    hist[bin_of(img.get(x, y))] += 1.0;
                }
            }
            let n: f64 = hist.iter().sum();
            let limit = params.clip_limit * n;
            let mut excess = 0.0;
            for c in hist.iter_mut() {
                if *c > limit {
                    excess += *c - limit;
                    *c = limit;
                }
            }
            let share = excess / bins as f64;
            let mut acc = 0.0;
            let lut: Vec<f64> = hist
                .iter()
                .map(|c| {
                    acc += c + share;
                    (acc / n).min(1.0)
                })
                .collect();
            luts.push(lut);
        }
    }

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (r0, r1, ty) = rows.locate(y as f64);
        for x in 0..w {
            let (c0, c1, tx) = cols.locate(x as f64);
            let b = bin_of(img.get(x, y));
            let at = |r: usize, c: usize| luts[r * params.tile_cols + c][b];
            let top = at(r0, c0) * (1.0 - tx) + at(r0, c1) * tx;
            let bottom = at(r1, c0) * (1.0 - tx) + at(r1, c1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Ok(GrayImage::from_raw_clamped(w, h, out, img.nm_per_pixel()))
}
