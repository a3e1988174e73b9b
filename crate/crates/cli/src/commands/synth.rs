use std::path::PathBuf;

use defectometer_core::image_io::write_gray16;
use defectometer_core::synth::{
    generate_scene, perturb_detections, random_scene, PerturbLog, PerturbParams, RandomSceneConfig, SceneSpec,
    RNG_ALGORITHM,
};
use defectometer_core::{save_dataset, AnnotatedImage, Dataset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_unit_interval;
use crate::error::CliError;
use crate::files::{manifest_in, read_text, to_json, RunRecord};
use crate::geometry_csv::{to_csv, GeometryRow};

#[derive(clap::Args, Serialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["spec", "random"])))]
pub struct Args {
    /// Scene spec JSON: one SceneSpec object or an array of them.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Generate this many random scenes instead of reading a spec.
    #[arg(long)]
    pub random: Option<usize>,
    /// Seed of the first random scene; scene k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Canvas side of random scenes, in pixels.
    #[arg(long, default_value_t = RandomSceneConfig::default().width)]
    pub size: usize,
    #[arg(long, default_value_t = RandomSceneConfig::default().nm_per_pixel)]
    pub nm_per_pixel: f64,
    /// Noise sigma of random scenes.
    #[arg(long, default_value_t = RandomSceneConfig::default().noise_sigma)]
    pub noise: f64,
    /// Blur sigma of random scenes.
    #[arg(long, default_value_t = RandomSceneConfig::default().blur_sigma)]
    pub blur: f64,
    /// Defects of each morphology per random scene.
    #[arg(long, default_value_t = 2)]
    pub per_morphology: usize,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also attach simulated detector output to every image.
    #[arg(long)]
    pub detections: bool,
    /// Minimum IoU of a jittered detection against its label.
    #[arg(long, default_value_t = 1.0)]
    pub jitter_iou: f64,
    #[arg(long, default_value_t = 0.0)]
    pub flip_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    pub miss_prob: f64,
    /// Mean number of spurious detections per image.
    #[arg(long, default_value_t = 0.0)]
    pub spurious_rate: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    One(SceneSpec),
    Many(Vec<SceneSpec>),
}

#[derive(Serialize)]
struct PerturbRecord<'a> {
    image_id: &'a str,
    seed: u64,
    #[serde(flatten)]
    log: &'a PerturbLog,
}

#[derive(Serialize)]
struct ScenesFile<'a> {
    rng: &'static str,
    scenes: Vec<(&'a str, &'a SceneSpec)>,
}

fn specs(args: &Args) -> Result<Vec<SceneSpec>, CliError> {
    if let Some(path) = &args.spec {
        let text = read_text(path)?;
        let parsed: SpecFile = serde_json::from_str(&text)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        return Ok(match parsed {
            SpecFile::One(s) => vec![s],
            SpecFile::Many(v) => v,
        });
    }
    let n = args.random.expect("clap requires --spec or --random");
    let config = RandomSceneConfig {
        width: args.size,
        height: args.size,
        nm_per_pixel: args.nm_per_pixel,
        noise_sigma: args.noise,
        blur_sigma: args.blur,
        counts: [args.per_morphology; 4],
        ..RandomSceneConfig::default()
    };
    (0..n as u64)
        .map(|k| Ok(random_scene(&config, args.seed.wrapping_add(k))?))
        .collect()
}

pub fn run(args: &Args) -> Result<(), CliError> {
    check_unit_interval("--jitter-iou", args.jitter_iou)?;
    check_unit_interval("--flip-prob", args.flip_prob)?;
    check_unit_interval("--miss-prob", args.miss_prob)?;
    if !(args.spurious_rate >= 0.0 && args.spurious_rate.is_finite()) {
        return Err(CliError::invalid("--spurious-rate must be >= 0"));
    }
    let params = PerturbParams {
        iou_floor: args.jitter_iou,
        class_flip_prob: args.flip_prob,
        miss_prob: args.miss_prob,
        spurious_rate: args.spurious_rate,
    };
    let specs = specs(args)?;
    if specs.is_empty() {
        return Err(CliError::invalid("no scenes to generate"));
    }
    let ids: Vec<String> = (0..specs.len()).map(|k| format!("scene_{k:03}")).collect();
    crate::files::create_dir(&args.out_dir)?;

    let rendered: Vec<(AnnotatedImage, Vec<GeometryRow>, Option<PerturbLog>, PathBuf)> = specs
        .par_iter()
        .zip(&ids)
        .map(|(spec, id)| {
            let scene = generate_scene(spec).map_err(|e| CliError::invalid(format!("scene {id}: {e}")))?;
            let path = args.out_dir.join(format!("{id}.png"));
            write_gray16(&scene.image, &path)?;
            let mut entry = AnnotatedImage::new(id.clone(), format!("{id}.png"), spec.width, spec.height);
            entry.nm_per_pixel = Some(spec.nm_per_pixel);
            entry.labels = scene.labels;
            let log = args.detections.then(|| {
                let (dets, log) =
                    perturb_detections(&entry.labels, &params, spec.width, spec.height, spec.rng_seed.wrapping_add(1));
                entry.detections = dets;
                log
            });
            let rows = scene
                .geometry
                .into_iter()
                .map(|g| GeometryRow { image_id: id.clone(), class: g.class, fit: Ok(g) })
                .collect();
            Ok((entry, rows, log, path))
        })
        .collect::<Result<_, CliError>>()?;

    let mut record = RunRecord::new("synth");
    if let Some(p) = &args.spec {
        record.input(p);
    }
    let mut images = Vec::with_capacity(rendered.len());
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for ((entry, r, log, path), spec) in rendered.into_iter().zip(&specs) {
        record.output(path);
        rows.extend(r);
        if let Some(log) = log {
            logs.push((entry.id.clone(), spec.rng_seed.wrapping_add(1), log));
        }
        images.push(entry);
    }
    log::info!("rendered {} scenes into {}", images.len(), args.out_dir.display());

    record.write(&args.out_dir.join("annotations.json"), &save_dataset(&Dataset::new(images)))?;
    record.write(&args.out_dir.join("truth.csv"), &to_csv(&rows))?;
    let scenes = ScenesFile { rng: RNG_ALGORITHM, scenes: ids.iter().map(String::as_str).zip(&specs).collect() };
    record.write(&args.out_dir.join("scenes.json"), &to_json(&scenes))?;
    if args.detections {
        let records: Vec<PerturbRecord> =
            logs.iter().map(|(id, seed, log)| PerturbRecord { image_id: id, seed: *seed, log }).collect();
        record.write(&args.out_dir.join("perturb_log.json"), &to_json(&records))?;
    }
    record.finish(args, &manifest_in(&args.out_dir))
}
