//! Grayscale preprocessing: CLAHE, Gaussian blur, three-channel composites,
//! dihedral augmentation and padded cropping.

mod clahe;
mod dihedral;
mod filter;

pub use clahe::{clahe, ClaheParams};
pub use dihedral::{augment, DihedralTransform};
pub use filter::{gaussian_blur, gaussian_kernel};
pub(crate) use filter::reflect;

use thiserror::Error;

use crate::types::{BBox, CompositeImage, GrayImage};

/// Default blur width for the composite's blue channel.
pub const DEFAULT_BLUR_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImagingError {
    #[error("image {width}x{height} is smaller than the {min_width}x{min_height} tile grid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("crop of box {0:?} misses the image")]
    EmptyCrop([f64; 4]),
}

/// R = the raw image, G = CLAHE-enhanced, B = Gaussian-blurred.
pub fn synthesize_channels(
    img: &GrayImage,
    clahe_params: &ClaheParams,
    sigma: f64,
) -> Result<CompositeImage, ImagingError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ImagingError::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    let green = clahe(img, clahe_params)?;
    let blue = gaussian_blur(img, sigma);
    Ok(CompositeImage::new(img.clone(), green, blue).expect("filters preserve dimensions"))
}

/// A cropped region and the image coordinates of its top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: GrayImage,
    pub offset_x: usize,
    pub offset_y: usize,
}

/// Crops `box` grown by `pad` pixels on each side, clipped to the image.
/// Fractional edges are rounded outward to whole pixels.
pub fn crop(img: &GrayImage, bbox: &BBox, pad: f64) -> Result<Patch, ImagingError> {
    let pad = pad.max(0.0);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x0 = (bbox.x_min() - pad).floor().max(0.0);
    let y0 = (bbox.y_min() - pad).floor().max(0.0);
    let x1 = (bbox.x_max() + pad).ceil().min(w);
    let y1 = (bbox.y_max() + pad).ceil().min(h);
    if x1 <= x0 || y1 <= y0 {
        return Err(ImagingError::EmptyCrop(bbox.to_array()));
    }
    let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
    let (pw, ph) = (x1 - x0, y1 - y0);
    let mut pixels = Vec::with_capacity(pw * ph);
    for y in y0..y1 {
        pixels.extend_from_slice(&img.pixels()[y * img.width() + x0..y * img.width() + x1]);
    }
    Ok(Patch {
        image: GrayImage::from_raw_clamped(pw, ph, pixels, img.nm_per_pixel()),
        offset_x: x0,
        offset_y: y0,
    })
}
