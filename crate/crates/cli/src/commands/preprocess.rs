use std::path::{Path, PathBuf};
use std::str::FromStr;

use defectometer_core::image_io::{read_gray, write_composite};
use defectometer_core::imaging::{synthesize_channels, ClaheParams, DihedralTransform, DEFAULT_BLUR_SIGMA};
use defectometer_core::{save_dataset, AnnotatedImage, CompositeImage, Dataset, GroundTruthLabel, Detection};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::CliError;
use crate::files::{load_image, load_sorted, manifest_in, RunRecord};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "tif", "tiff", "jpg"];

/// CLAHE tile grid, written `RxC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tiles {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Tiles {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected RxC, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Tiles { rows: parse(r)?, cols: parse(c)? })
    }
}

impl std::fmt::Display for Tiles {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl Serialize for Tiles {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Directory of micrographs, or an annotation JSON.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for composites and annotations.json.
    #[arg(long)]
    pub out: PathBuf,
    /// CLAHE clip limit, as a fraction of each tile's pixels.
    #[arg(long, default_value_t = ClaheParams::default().clip_limit)]
    pub clip_limit: f64,
    /// CLAHE tile grid.
    #[arg(long, default_value = "8x8")]
    pub tiles: Tiles,
    /// Blur sigma of the blue channel, in pixels.
    #[arg(long, default_value_t = DEFAULT_BLUR_SIGMA)]
    pub sigma: f64,
    /// Emit all eight rotations/reflections of every image.
    #[arg(long)]
    pub augment: bool,
}

/// Without annotations, every image file in the directory becomes an
/// unlabeled, unscaled entry keyed by its file stem.
fn scan_dir(dir: &Path) -> Result<Dataset, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut images = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let decoded = read_gray(&path)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let stem = path.file_stem().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        images.push(AnnotatedImage::new(stem, name, decoded.image.width(), decoded.image.height()));
    }
    images.sort_by(|a, b| a.id.cmp(&b.id));
    if images.is_empty() {
        return Err(CliError::invalid(format!("{}: no images found", dir.display())));
    }
    Ok(Dataset::new(images))
}

fn transform_composite(c: &CompositeImage, t: DihedralTransform) -> CompositeImage {
    CompositeImage::new(t.apply_image(&c.red), t.apply_image(&c.green), t.apply_image(&c.blue))
        .expect("channels share dimensions")
}

fn transform_entry(img: &AnnotatedImage, t: DihedralTransform, id: String) -> AnnotatedImage {
    let (w, h) = t.output_dims(img.width, img.height);
    AnnotatedImage {
        path: format!("{id}.png"),
        id,
        width: w,
        height: h,
        nm_per_pixel: img.nm_per_pixel,
        labels: img
            .labels
            .iter()
            .map(|l| GroundTruthLabel { class: l.class, bbox: t.apply_box(&l.bbox, img.width, img.height) })
            .collect(),
        detections: img
            .detections
            .iter()
            .map(|d| Detection { class: d.class, bbox: t.apply_box(&d.bbox, img.width, img.height), score: d.score })
            .collect(),
    }
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let params = ClaheParams {
        clip_limit: args.clip_limit,
        tile_rows: args.tiles.rows,
        tile_cols: args.tiles.cols,
        ..ClaheParams::default()
    };
    params.validate()?;
    let (dataset, annotation) = if args.input.is_dir() {
        (scan_dir(&args.input)?, args.input.join("annotations.json"))
    } else {
        (load_sorted(&args.input)?, args.input.clone())
    };
    let transforms: &[DihedralTransform] =
        if args.augment { &DihedralTransform::ALL } else { &DihedralTransform::ALL[..1] };

    crate::files::create_dir(&args.out)?;
    let entries: Vec<Vec<(AnnotatedImage, PathBuf)>> = dataset
        .images
        .par_iter()
        .map(|img| {
            let gray = load_image(&annotation, img)?;
            let composite = synthesize_channels(&gray, &params, args.sigma)?;
            let mut out = Vec::with_capacity(transforms.len());
            for &t in transforms {
                let id = if args.augment { format!("{}{}", img.id, t.suffix()) } else { img.id.clone() };
                let entry = transform_entry(img, t, id);
                let path = args.out.join(&entry.path);
                write_composite(&transform_composite(&composite, t), &path)?;
                out.push((entry, path));
            }
            Ok(out)
        })
        .collect::<Result<_, CliError>>()?;

    let mut record = RunRecord::new("preprocess");
    if !args.input.is_dir() {
        record.input(&args.input);
    }
    for img in &dataset.images {
        record.input(Dataset::resolve_path(&annotation, img));
    }
    let mut merged = Vec::new();
    for (entry, path) in entries.into_iter().flatten() {
        record.output(path);
        merged.push(entry);
    }
    log::info!("wrote {} composites to {}", merged.len(), args.out.display());
    record.write(&args.out.join("annotations.json"), &save_dataset(&Dataset::new(merged)))?;
    record.finish(args, &manifest_in(&args.out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_parse() {
        assert_eq!("8x8".parse::<Tiles>().unwrap(), Tiles { rows: 8, cols: 8 });
        assert_eq!("4X2".parse::<Tiles>().unwrap(), Tiles { rows: 4, cols: 2 });
        assert!("8".parse::<Tiles>().is_err());
        assert!("ax2".parse::<Tiles>().is_err());
    }
}
