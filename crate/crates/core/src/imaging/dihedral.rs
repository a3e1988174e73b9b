//! The eight lossless symmetries of the square, acting on images and boxes.

use serde::{Deserialize, Serialize};

use crate::types::{BBox, GrayImage};

/// Rotations are clockwise as displayed (y axis pointing down).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DihedralTransform {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipHorizontal,
    FlipVertical,
    /// Reflection about the main diagonal, `(x, y) -> (y, x)`.
    Transpose,
    /// Reflection about the anti-diagonal.
    AntiTranspose,
}

impl DihedralTransform {
    pub const ALL: [DihedralTransform; 8] = [
        DihedralTransform::Identity,
        DihedralTransform::Rot90,
        DihedralTransform::Rot180,
        DihedralTransform::Rot270,
        DihedralTransform::FlipHorizontal,
        DihedralTransform::FlipVertical,
        DihedralTransform::Transpose,
        DihedralTransform::AntiTranspose,
    ];

    pub fn inverse(self) -> Self {
        match self {
            DihedralTransform::Rot90 => DihedralTransform::Rot270,
            DihedralTransform::Rot270 => DihedralTransform::Rot90,
            other => other,
        }
    }

    /// File-name suffix used for augmented variants.
    pub fn suffix(self) -> &'static str {
        match self {
            DihedralTransform::Identity => "_id",
            DihedralTransform::Rot90 => "_r90",
            DihedralTransform::Rot180 => "_r180",
            DihedralTransform::Rot270 => "_r270",
            DihedralTransform::FlipHorizontal => "_fh",
            DihedralTransform::FlipVertical => "_fv",
            DihedralTransform::Transpose => "_d1",
            DihedralTransform::AntiTranspose => "_d2",
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(
            self,
            DihedralTransform::Rot90
                | DihedralTransform::Rot270
                | DihedralTransform::Transpose
                | DihedralTransform::AntiTranspose
        )
    }

    /// Output dimensions for an input of `width × height`.
    pub fn output_dims(self, width: usize, height: usize) -> (usize, usize) {
        if self.swaps_axes() {
            (height, width)
        } else {
            (width, height)
        }
    }

    /// Maps a continuous point of a `width × height` canvas.
    pub fn map_point(self, x: f64, y: f64, width: f64, height: f64) -> (f64, f64) {
        match self {
            DihedralTransform::Identity => (x, y),
            DihedralTransform::Rot90 => (height - y, x),
            DihedralTransform::Rot180 => (width - x, height - y),
            DihedralTransform::Rot270 => (y, width - x),
            DihedralTransform::FlipHorizontal => (width - x, y),
            DihedralTransform::FlipVertical => (x, height - y),
            DihedralTransform::Transpose => (y, x),
            DihedralTransform::AntiTranspose => (height - y, width - x),
        }
    }

    /// Maps the pixel at integer index `(x, y)`.
    fn map_pixel(self, x: usize, y: usize, width: usize, height: usize) -> (usize, usize) {
        let (px, py) = self.map_point(x as f64 + 0.5, y as f64 + 0.5, width as f64, height as f64);
        (px.floor() as usize, py.floor() as usize)
    }

    pub fn apply_image(self, img: &GrayImage) -> GrayImage {
        let (w, h) = (img.width(), img.height());
        let (ow, oh) = self.output_dims(w, h);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = self.map_pixel(x, y, w, h);
                out[ny * ow + nx] = img.get(x, y);
            }
        }
        GrayImage::from_raw_clamped(ow, oh, out, img.nm_per_pixel())
    }

    pub fn apply_box(self, b: &BBox, width: usize, height: usize) -> BBox {
        let (w, h) = (width as f64, height as f64);
        let p = self.map_point(b.x_min(), b.y_min(), w, h);
        let q = self.map_point(b.x_max(), b.y_max(), w, h);
        BBox::from_corners(p, q).expect("dihedral maps preserve box area")
    }
}

/// Applies `t` to an image and the boxes that live on it.
pub fn augment(img: &GrayImage, boxes: &[BBox], t: DihedralTransform) -> (GrayImage, Vec<BBox>) {
    let mapped = boxes
        .iter()
        .map(|b| t.apply_box(b, img.width(), img.height()))
        .collect();
    (t.apply_image(img), mapped)
}
