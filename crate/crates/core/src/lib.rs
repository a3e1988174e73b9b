//! Analysis toolkit for defect micrographs.
//!
//! - [`imaging`]: CLAHE, Gaussian blur, composites, dihedral augmentation.
//! - [`geometry`]: watershed segmentation and ellipse fitting per box.
//! - [`eval`]: IoU matching, precision/recall/F1, confusion matrices, sweeps.
//! - [`stats`]: per-class diameter statistics, densities, comparisons.
//! - [`synth`]: synthetic scenes with exact ground truth.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod image_io;
pub mod imaging;
pub mod stats;
pub mod synth;
pub mod types;

pub use dataset::{load_dataset, save_dataset, AnnotatedImage, Dataset, DatasetError, LoadWarning};
pub use types::{BBox, CompositeImage, DefectClass, Detection, GrayImage, GroundTruthLabel};
