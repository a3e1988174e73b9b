//! Annotation JSON data model.
//!
//! ```json
//! { "images": [ { "id": "img01", "path": "img01.png", "width": 512, "height": 512,
//!                 "nm_per_pixel": 0.5,
//!                 "labels":     [ { "class": "loop111", "bbox": [10, 12, 40, 44] } ],
//!                 "detections": [ { "class": "loop111", "bbox": [11, 12, 41, 43], "score": 0.93 } ] } ] }
//! ```
//!
//! Loading validates every record. Boxes overhanging the image are clipped and
//! reported as warnings; a box that is empty after clipping rejects the file.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BBox, DefectClass, Detection, GroundTruthLabel, NM_PER_PIXEL_RANGE};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: malformed annotation file at line {line}, column {column}: {message}")]
    MalformedFile {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("image {image_id:?}, {record}: unknown defect class {class:?}")]
    UnknownClass {
        image_id: String,
        record: String,
        class: String,
    },
    #[error("image {image_id:?}, {record}: box {bbox:?} has no area inside the image")]
    NonPositiveBox {
        image_id: String,
        record: String,
        bbox: Vec<f64>,
    },
    #[error("image {image_id:?}, {field}: {message}")]
    InvalidField {
        image_id: String,
        field: String,
        message: String,
    },
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    /// True for errors caused by reading or writing files rather than content.
    pub fn is_io(&self) -> bool {
        matches!(self, DatasetError::Io { .. })
    }
}

/// A non-fatal adjustment made while loading.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadWarning {
    pub image_id: String,
    pub record: String,
    pub message: String,
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "image {:?}, {}: {}", self.image_id, self.record, self.message)
    }
}

/// One micrograph with its human labels and (optionally) detector output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedImage {
    pub id: String,
    pub path: String,
    pub width: usize,
    pub height: usize,
    pub nm_per_pixel: Option<f64>,
    pub labels: Vec<GroundTruthLabel>,
    pub detections: Vec<Detection>,
}

impl AnnotatedImage {
    pub fn new(id: impl Into<String>, path: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            id: id.into(),
            path: path.into(),
            width,
            height,
            nm_per_pixel: None,
            labels: Vec::new(),
            detections: Vec::new(),
        }
    }

    /// Image area in square metres, when the scale is known.
    pub fn area_m2(&self) -> Option<f64> {
        self.nm_per_pixel
            .map(|s| self.width as f64 * self.height as f64 * s * s * 1e-18)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Dataset {
    pub images: Vec<AnnotatedImage>,
}

impl Dataset {
    pub fn new(images: Vec<AnnotatedImage>) -> Self {
        Self { images }
    }

    /// Resolves an image path relative to the directory holding the annotation file.
    pub fn resolve_path(annotation_file: &Path, image: &AnnotatedImage) -> PathBuf {
        let p = Path::new(&image.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            annotation_file
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(p)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    images: Vec<RawImage>,
}

#[derive(Deserialize)]
struct RawImage {
    id: String,
    path: String,
    width: usize,
    height: usize,
    #[serde(default)]
    nm_per_pixel: Option<f64>,
    #[serde(default)]
    labels: Vec<RawBox>,
    #[serde(default)]
    detections: Vec<RawBox>,
}

#[derive(Deserialize)]
struct RawBox {
    #[serde(rename = "class")]
    class: String,
    bbox: [f64; 4],
    #[serde(default)]
    score: Option<f64>,
}

/// Reads and validates an annotation file.
pub fn load_dataset(path: &Path) -> Result<(Dataset, Vec<LoadWarning>), DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, &path.display().to_string())
}

/// Parses annotation JSON text. `origin` names the source in error messages.
pub fn parse_dataset(text: &str, origin: &str) -> Result<(Dataset, Vec<LoadWarning>), DatasetError> {
    let raw: RawDataset = serde_json::from_str(text).map_err(|e| DatasetError::MalformedFile {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut images = Vec::with_capacity(raw.images.len());
    for img in raw.images {
        if !seen.insert(img.id.clone()) {
            return Err(DatasetError::DuplicateId(img.id));
        }
        images.push(validate_image(img, &mut warnings)?);
    }
    Ok((Dataset { images }, warnings))
}

fn validate_image(raw: RawImage, warnings: &mut Vec<LoadWarning>) -> Result<AnnotatedImage, DatasetError> {
    let invalid = |field: &str, message: String| DatasetError::InvalidField {
        image_id: raw.id.clone(),
        field: field.to_string(),
        message,
    };
    if raw.width == 0 || raw.height == 0 {
        return Err(invalid(
            "width/height",
            format!("dimensions must be positive, got {}x{}", raw.width, raw.height),
        ));
    }
    if let Some(s) = raw.nm_per_pixel {
        let (lo, hi) = NM_PER_PIXEL_RANGE;
        if !(s.is_finite() && (lo..=hi).contains(&s)) {
            return Err(invalid("nm_per_pixel", format!("{s} outside [{lo}, {hi}]")));
        }
    }

    let (w, h) = (raw.width as f64, raw.height as f64);
    let mut labels = Vec::with_capacity(raw.labels.len());
    for (i, rb) in raw.labels.iter().enumerate() {
        let record = format!("labels[{i}]");
        let (class, bbox) = validate_box(&raw.id, &record, rb, w, h, warnings)?;
        labels.push(GroundTruthLabel { class, bbox });
    }
    let mut detections = Vec::with_capacity(raw.detections.len());
    for (i, rb) in raw.detections.iter().enumerate() {
        let record = format!("detections[{i}]");
        let (class, bbox) = validate_box(&raw.id, &record, rb, w, h, warnings)?;
        let score = rb
            .score
            .ok_or_else(|| invalid(&record, "missing score".to_string()))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(invalid(&record, format!("score {score} outside [0, 1]")));
        }
        detections.push(Detection { class, bbox, score });
    }

    Ok(AnnotatedImage {
        id: raw.id,
        path: raw.path,
        width: raw.width,
        height: raw.height,
        nm_per_pixel: raw.nm_per_pixel,
        labels,
        detections,
    })
}

fn validate_box(
    image_id: &str,
    record: &str,
    rb: &RawBox,
    width: f64,
    height: f64,
    warnings: &mut Vec<LoadWarning>,
) -> Result<(DefectClass, BBox), DatasetError> {
    let class: DefectClass = rb.class.parse().map_err(|_| DatasetError::UnknownClass {
        image_id: image_id.to_string(),
        record: record.to_string(),
        class: rb.class.clone(),
    })?;
    let [x0, y0, x1, y1] = rb.bbox;
    let non_positive = || DatasetError::NonPositiveBox {
        image_id: image_id.to_string(),
        record: record.to_string(),
        bbox: rb.bbox.to_vec(),
    };
    let bbox = BBox::new(x0, y0, x1, y1).map_err(|_| non_positive())?;
    if bbox.is_within(width, height) {
        return Ok((class, bbox));
    }
    let clipped = bbox.clipped(width, height).ok_or_else(non_positive)?;
    warnings.push(LoadWarning {
        image_id: image_id.to_string(),
        record: record.to_string(),
        message: format!(
            "box {:?} clipped to {:?}",
            bbox.to_array(),
            clipped.to_array()
        ),
    });
    Ok((class, clipped))
}

/// Serializes a dataset as pretty-printed annotation JSON.
///
/// Floats use the shortest representation that parses back to the same
/// value, so `load(save(d)) == d` holds exactly.
pub fn save_dataset(dataset: &Dataset) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(dataset).expect("dataset serialization is infallible");
    out.push(b'\n');
    out
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, save_dataset(dataset)).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<(Dataset, Vec<LoadWarning>), DatasetError> {
        parse_dataset(text, "test.json")
    }

    #[test]
    fn minimal_file() {
        let (d, w) = parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 100, "height": 100,
                "nm_per_pixel": null,
                "labels": [{"class": "loop111", "bbox": [1, 2, 3, 4]}], "detections": []}]}"#,
        )
        .unwrap();
        assert_eq!(d.images.len(), 1);
        assert_eq!(d.images[0].labels.len(), 1);
        assert!(w.is_empty());
    }

    #[test]
    fn overhanging_box_is_clipped_with_warning() {
        let (d, w) = parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 100, "height": 100,
                "labels": [{"class": "blackdot", "bbox": [-5, 0, 10, 10]}]}]}"#,
        )
        .unwrap();
        assert_eq!(d.images[0].labels[0].bbox.to_array(), [0.0, 0.0, 10.0, 10.0]);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].record, "labels[0]");
    }

    #[test]
    fn unknown_class_names_record() {
        let err = parse(
            r#"{"images": [{"id": "img7", "path": "a.png", "width": 10, "height": 10,
                "labels": [{"class": "loop100", "bbox": [0, 0, 2, 2]},
                           {"class": "void", "bbox": [0, 0, 2, 2]}]}]}"#,
        )
        .unwrap_err();
        match err {
            DatasetError::UnknownClass { image_id, record, class } => {
                assert_eq!(image_id, "img7");
                assert_eq!(record, "labels[1]");
                assert_eq!(class, "void");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn box_outside_image_is_rejected() {
        let err = parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 10, "height": 10,
                "labels": [{"class": "loop100", "bbox": [12, 0, 20, 5]}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::NonPositiveBox { .. }));
        let err = parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 10, "height": 10,
                "labels": [{"class": "loop100", "bbox": [5, 0, 5, 5]}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::NonPositiveBox { .. }));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 10, "height": 10},
                           {"id": "a", "path": "b.png", "width": 10, "height": 10}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn malformed_reports_position() {
        let err = parse("{\"images\": [\n {\"id\": 3}]}").unwrap_err();
        match err {
            DatasetError::MalformedFile { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_score_and_scale() {
        assert!(parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 10, "height": 10,
                "detections": [{"class": "loop100", "bbox": [0, 0, 5, 5], "score": 1.5}]}]}"#,
        )
        .is_err());
        assert!(parse(
            r#"{"images": [{"id": "a", "path": "a.png", "width": 10, "height": 10, "nm_per_pixel": 0}]}"#,
        )
        .is_err());
    }

    #[test]
    fn empty_dataset_serialization() {
        let bytes = save_dataset(&Dataset::default());
        let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(value, serde_json::json!({"images": []}));
    }

    #[test]
    fn key_order_and_exact_score() {
        let mut img = AnnotatedImage::new("a", "a.png", 20, 20);
        img.nm_per_pixel = Some(0.5);
        img.detections.push(Detection {
            class: DefectClass::BlackDot,
            bbox: BBox::new(1.0, 1.0, 4.0, 4.0).unwrap(),
            score: 0.25,
        });
        let d = Dataset::new(vec![img]);
        let text = String::from_utf8(save_dataset(&d)).unwrap();
        let keys = ["\"id\"", "\"path\"", "\"width\"", "\"height\"", "\"nm_per_pixel\"", "\"labels\"", "\"detections\""];
        let positions: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        let (back, _) = parse(&text).unwrap();
        assert_eq!(back.images[0].detections[0].score, 0.25);
        assert_eq!(back, d);
    }

    fn arb_box(w: usize, h: usize) -> impl Strategy<Value = BBox> {
        (0.0..w as f64 - 1.0, 0.0..h as f64 - 1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(move |(x, y, fw, fh)| {
            let x1 = x + fw * (w as f64 - x);
            let y1 = y + fh * (h as f64 - y);
            BBox::new(x, y, x1, y1).unwrap()
        })
    }

    fn arb_image(id: usize) -> impl Strategy<Value = AnnotatedImage> {
        (2usize..400, 2usize..400, proptest::option::of(0.01f64..100.0)).prop_flat_map(move |(w, h, scale)| {
            let labels = proptest::collection::vec((0usize..3, arb_box(w, h)), 0..4);
            let dets = proptest::collection::vec((0usize..3, arb_box(w, h), 0.0f64..=1.0), 0..4);
            (labels, dets).prop_map(move |(labels, dets)| {
                let mut img = AnnotatedImage::new(format!("img{id}"), format!("dir/img{id}.png"), w, h);
                img.nm_per_pixel = scale;
                img.labels = labels
                    .into_iter()
                    .map(|(c, bbox)| GroundTruthLabel { class: DefectClass::ALL[c], bbox })
                    .collect();
                img.detections = dets
                    .into_iter()
                    .map(|(c, bbox, score)| Detection { class: DefectClass::ALL[c], bbox, score })
                    .collect();
                img
            })
        })
    }

    proptest! {
        #[test]
        fn load_inverts_save(images in (0usize..4).prop_flat_map(|n| (0..n).map(arb_image).collect::<Vec<_>>())) {
            let d = Dataset::new(images);
            let text = String::from_utf8(save_dataset(&d)).unwrap();
            let (back, warnings) = parse(&text).unwrap();
            prop_assert!(warnings.is_empty());
            prop_assert_eq!(back, d);
        }
    }
}
