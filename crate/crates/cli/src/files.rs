//! Shared input/output plumbing: dataset and image loading, file writes and
//! the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use defectometer_core::image_io::read_gray;
use defectometer_core::{load_dataset, AnnotatedImage, Dataset, GrayImage};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Loads an annotation file, logs its warnings and orders images by id.
pub fn load_sorted(path: &Path) -> Result<Dataset, CliError> {
    let (mut dataset, warnings) = load_dataset(path)?;
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    dataset.images.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(dataset)
}

/// Reads the micrograph behind `image`; the annotation's size must match
/// and its scale takes precedence.
pub fn load_image(annotation: &Path, image: &AnnotatedImage) -> Result<GrayImage, CliError> {
    let path = Dataset::resolve_path(annotation, image);
    let decoded = read_gray(&path)?;
    if decoded.dropped_channels {
        log::warn!("{}: multi-channel image, using the first channel", path.display());
    }
    let img = decoded.image;
    if (img.width(), img.height()) != (image.width, image.height) {
        return Err(CliError::invalid(format!(
            "image {:?}: {} is {}x{} but the annotation says {}x{}",
            image.id,
            path.display(),
            img.width(),
            img.height(),
            image.width,
            image.height
        )));
    }
    img.with_scale(image.nm_per_pixel)
        .map_err(|e| CliError::invalid(format!("image {:?}: {e}", image.id)))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Inputs and outputs of one run, recorded with their SHA-256 digests.
///
/// The worker count is deliberately absent from `config`: outputs do not
/// depend on it, and neither should the manifest.
pub struct RunRecord {
    command: &'static str,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn new(command: &'static str) -> Self {
        Self { command, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Writes bytes and records the file as an output.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_file(path, bytes)?;
        self.output(path);
        Ok(())
    }

    pub fn finish<C: Serialize>(mut self, config: &C, manifest: &Path) -> Result<(), CliError> {
        let digests = |paths: &mut Vec<PathBuf>| -> Result<Vec<FileDigest>, CliError> {
            paths.sort();
            paths.dedup();
            paths
                .iter()
                .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? }))
                .collect()
        };
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config,
            inputs: digests(&mut self.inputs)?,
            outputs: digests(&mut self.outputs)?,
        };
        write_file(manifest, &to_json(&m))?;
        log::info!("wrote {}", manifest.display());
        Ok(())
    }
}

/// Manifest path for a single-file output: `report.json` → `report.json.manifest.json`.
pub fn manifest_beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Manifest path for a directory output.
pub fn manifest_in(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
