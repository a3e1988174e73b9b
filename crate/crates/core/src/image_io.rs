//! Reading and writing micrographs and composites.
//!
//! Inputs are PNG or TIFF, 8- or 16-bit. Intensities are divided by the type
//! maximum. Multi-channel inputs keep only their first channel.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use thiserror::Error;

use crate::types::{CompositeImage, GrayImage, TypeError};

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Encode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: unsupported pixel format {format}")]
    Unsupported { path: String, format: String },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: TypeError,
    },
}

impl ImageIoError {
    /// Errors that stem from the filesystem rather than file contents.
    pub fn is_io(&self) -> bool {
        match self {
            ImageIoError::Decode { source, .. } | ImageIoError::Encode { source, .. } => {
                matches!(source, image::ImageError::IoError(_))
            }
            _ => false,
        }
    }
}

/// A decoded micrograph plus whether channels were discarded on the way in.
#[derive(Debug, Clone)]
pub struct DecodedImage {
    pub image: GrayImage,
    pub dropped_channels: bool,
}

pub fn read_gray(path: &Path) -> Result<DecodedImage, ImageIoError> {
    let name = path.display().to_string();
    let dynamic = image::open(path).map_err(|source| ImageIoError::Decode {
        path: name.clone(),
        source,
    })?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);

    let (pixels, dropped_channels): (Vec<f64>, bool) = match &dynamic {
        DynamicImage::ImageLuma8(b) => (b.as_raw().iter().map(|&v| v as f64 / 255.0).collect(), false),
        DynamicImage::ImageLuma16(b) => (b.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(), false),
        DynamicImage::ImageLumaA8(b) => (first_channel(b.as_raw(), 2, 255.0), true),
        DynamicImage::ImageLumaA16(b) => (first_channel(b.as_raw(), 2, 65535.0), true),
        DynamicImage::ImageRgb8(b) => (first_channel(b.as_raw(), 3, 255.0), true),
        DynamicImage::ImageRgba8(b) => (first_channel(b.as_raw(), 4, 255.0), true),
        DynamicImage::ImageRgb16(b) => (first_channel(b.as_raw(), 3, 65535.0), true),
        DynamicImage::ImageRgba16(b) => (first_channel(b.as_raw(), 4, 65535.0), true),
        other => {
            return Err(ImageIoError::Unsupported {
                path: name,
                format: format!("{:?}", other.color()),
            })
        }
    };
    if dropped_channels {
        log::warn!("{name}: multi-channel image, using the first channel only");
    }
    let image = GrayImage::new(width, height, pixels, None)
        .map_err(|source| ImageIoError::Invalid { path: name, source })?;
    Ok(DecodedImage {
        image,
        dropped_channels,
    })
}

fn first_channel<T: Copy + Into<f64>>(raw: &[T], stride: usize, max: f64) -> Vec<f64> {
    raw.chunks_exact(stride).map(|c| c[0].into() / max).collect()
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 16-bit single-channel PNG (or TIFF, by extension).
pub fn write_gray16(image: &GrayImage, path: &Path) -> Result<(), ImageIoError> {
    let data: Vec<u16> = image.pixels().iter().map(|&v| quantize16(v)).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, data)
            .expect("buffer size matches dimensions");
    buf.save(path).map_err(|source| ImageIoError::Encode {
        path: path.display().to_string(),
        source,
    })
}

/// Writes an 8-bit RGB PNG with R = raw, G = enhanced, B = blurred.
pub fn write_composite(composite: &CompositeImage, path: &Path) -> Result<(), ImageIoError> {
    let mut data = Vec::with_capacity(composite.width() * composite.height() * 3);
    let planes = [
        composite.red.pixels(),
        composite.green.pixels(),
        composite.blue.pixels(),
    ];
    for i in 0..composite.width() * composite.height() {
        for plane in planes {
            data.push(quantize8(plane[i]));
        }
    }
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(composite.width() as u32, composite.height() as u32, data)
            .expect("buffer size matches dimensions");
    buf.save(path).map_err(|source| ImageIoError::Encode {
        path: path.display().to_string(),
        source,
    })
}
