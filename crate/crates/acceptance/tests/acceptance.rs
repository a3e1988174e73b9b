//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion (straight to stderr, so it shows even when output is captured)
//! and then asserts the same condition.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use defectometer_core::eval::{f1_score, iou, ConfusionMatrix, DEFAULT_IOU_THRESHOLDS, DEFAULT_SCORE_THRESHOLDS};
use defectometer_core::geometry::{analyze_defect, angle_distance, fit_ellipse, DefectGeometry, EllipseFit};
use defectometer_core::stats::{compare_reports, hardening_fractional_error, ErrorPropagation};
use defectometer_core::synth::{generate_scene, random_scene, Morphology, RandomSceneConfig};
use defectometer_core::{BBox, DefectClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

fn verdict(n: u32, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} criterion {n}: {detail}");
    assert!(pass, "criterion {n}: {detail}");
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

#[test]
fn criterion_1_f1_arithmetic() {
    let rows = [(0.73, 0.83, 0.78), (0.65, 0.71, 0.68), (0.62, 0.72, 0.67)];
    let got: Vec<f64> = rows.iter().map(|&(p, r, _)| f1_score(p, r)).collect();
    let pass = rows.iter().zip(&got).all(|(&(_, _, f), &g)| within(g, f, 0.005));
    verdict(1, pass, format!("F1 = {:.4}, {:.4}, {:.4} vs 0.78, 0.68, 0.67 (±0.005)", got[0], got[1], got[2]));
}

#[test]
fn criterion_2_confusion_percentages() {
    // Rows predicted, columns labeled, in the printed order.
    let order = [DefectClass::Loop111, DefectClass::BlackDot, DefectClass::Loop100];
    let printed = [[239, 21, 14], [17, 416, 8], [33, 13, 166]];
    let mut cm = ConfusionMatrix::default();
    for (i, row) in printed.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                cm.add(order[i], order[j]);
            }
        }
    }
    let pct = cm.row_percentages();
    let diag: Vec<f64> = order.iter().map(|c| pct[c.index()][c.index()].unwrap()).collect();
    let pass = within(diag[0], 87.2, 0.05) && within(diag[1], 94.3, 0.05) && within(diag[2], 78.3, 0.05);
    verdict(
        2,
        pass,
        format!("diagonal {:.3}%, {:.3}%, {:.3}% vs 87.2, 94.3, 78.3 (±0.05)", diag[0], diag[1], diag[2]),
    );
}

#[test]
fn criterion_3_hardening_sensitivity() {
    let lin = hardening_fractional_error(1.7, 21.4, ErrorPropagation::Linearized).unwrap();
    let exact = hardening_fractional_error(1.7, 21.4, ErrorPropagation::Exact).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut bound_ok = true;
    for _ in 0..1000 {
        let d: f64 = rng.random_range(0.5..200.0);
        let eps: f64 = rng.random_range(-0.5 * d..0.5 * d);
        let l = hardening_fractional_error(eps, d, ErrorPropagation::Linearized).unwrap();
        let e = hardening_fractional_error(eps, d, ErrorPropagation::Exact).unwrap();
        let gap = (e - l).abs();
        let bound = (eps / d).powi(2);
        worst = worst.max(gap / bound.max(f64::MIN_POSITIVE));
        bound_ok &= gap <= bound;
    }
    let pass = within(lin, 0.0397, 0.0005) && (0.038..=0.040).contains(&exact) && bound_ok;
    verdict(
        3,
        pass,
        format!("linearized {lin:.5}, exact {exact:.5}; worst gap/(ε/d)² over 1000 draws = {worst:.3}"),
    );
}

fn dots(class: DefectClass, diameter: f64) -> Vec<DefectGeometry> {
    let e = EllipseFit::new(0.0, 0.0, diameter / 2.0, diameter / 2.0, 0.0).unwrap();
    vec![DefectGeometry::new(class, e, Some(1.0))]
}

#[test]
fn criterion_4_relative_errors() {
    let pairs = [
        (DefectClass::Loop111, 22.4, 23.1, 3.1),
        (DefectClass::BlackDot, 8.2, 9.1, 10.9),
        (DefectClass::Loop100, 20.3, 22.4, 10.3),
    ];
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    for &(c, g, p, _) in &pairs {
        gt.extend(dots(c, g));
        pred.extend(dots(c, p));
    }
    let report = compare_reports(&gt, &pred, 1e-12).unwrap();
    let got: Vec<f64> = pairs
        .iter()
        .map(|&(c, ..)| report.class(c).diameter_error_pct.unwrap())
        .collect();
    let pass = pairs.iter().zip(&got).all(|(&(.., want), &g)| within(g, want, 0.05));
    verdict(
        4,
        pass,
        format!("errors {:.3}%, {:.3}%, {:.3}% vs 3.1, 10.9, 10.3 (±0.05)", got[0], got[1], got[2]),
    );
}

fn pixel_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let lo_x = a[0].min(b[0]);
    let hi_x = a[2].max(b[2]);
    let lo_y = a[1].min(b[1]);
    let hi_y = a[3].max(b[3]);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (p, q) = (inside(a, x, y), inside(b, x, y));
            inter += (p && q) as u64;
            union += (p || q) as u64;
        }
    }
    inter as f64 / union as f64
}

#[test]
fn criterion_5_iou_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_box = || {
        let x0 = rng.random_range(0..60i64);
        let y0 = rng.random_range(0..60i64);
        [x0, y0, x0 + rng.random_range(1..40i64), y0 + rng.random_range(1..40i64)]
    };
    let mut worst = 0.0f64;
    let mut overlapping = 0;
    for _ in 0..10_000 {
        let (a, b) = (random_box(), random_box());
        let to_box = |r: [i64; 4]| BBox::new(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64).unwrap();
        let analytic = iou(&to_box(a), &to_box(b));
        let counted = pixel_iou(a, b);
        overlapping += (counted > 0.0) as usize;
        let err = if counted == 0.0 { analytic.abs() } else { (analytic - counted).abs() / counted };
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 10.0;
    verdict(
        5,
        pass,
        format!("10000 box pairs ({overlapping} overlapping), worst relative error {worst:.2e}, {secs:.2} s"),
    );
}

#[test]
fn criterion_6_ellipse_fit_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let a: f64 = rng.random_range(4.0..=50.0);
        let b: f64 = rng.random_range(2.0..=a);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let cx: f64 = rng.random_range(-200.0..200.0);
        let cy: f64 = rng.random_range(-200.0..200.0);
        let truth = EllipseFit::new(cx, cy, a, b, theta).unwrap();
        let Ok(fit) = fit_ellipse(&truth.sample(40)) else {
            failures += 1;
            continue;
        };
        let errs = [
            (fit.a - a).abs() / a,
            (fit.b - b).abs() / b,
            angle_distance(fit.theta, truth.theta) / std::f64::consts::PI,
            (fit.cx - cx).abs() / cx.abs().max(a),
            (fit.cy - cy).abs() / cy.abs().max(a),
        ];
        worst = errs.into_iter().fold(worst, f64::max);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && worst <= 1e-6 && secs < 30.0;
    verdict(
        6,
        pass,
        format!("1000 ellipses, {failures} fit failures, worst relative error {worst:.2e}, {secs:.2} s"),
    );
}

#[test]
fn criterion_7_geometry_on_synthetic_scenes() {
    let start = Instant::now();
    let config = RandomSceneConfig { noise_sigma: 0.05, blur_sigma: 1.0, ..Default::default() };
    let per_scene: Vec<[(usize, usize); 4]> = (1000..1032u64)
        .into_par_iter()
        .map(|seed| {
            let spec = random_scene(&config, seed).unwrap();
            let scene = generate_scene(&spec).unwrap();
            let mut tally = [(0, 0); 4];
            for ((d, label), truth) in spec.defects.iter().zip(&scene.labels).zip(&scene.geometry) {
                let k = Morphology::ALL.iter().position(|m| *m == d.morphology).unwrap();
                let tol = (2.0 * spec.nm_per_pixel).max(0.1 * truth.diameter);
                let hit = analyze_defect(&scene.image, &label.bbox, label.class)
                    .is_ok_and(|g| (g.diameter - truth.diameter).abs() <= tol);
                tally[k].0 += hit as usize;
                tally[k].1 += 1;
            }
            tally
        })
        .collect();
    let mut tally = [(0, 0); 4];
    for t in &per_scene {
        for k in 0..4 {
            tally[k].0 += t[k].0;
            tally[k].1 += t[k].1;
        }
    }
    let hits: usize = tally.iter().map(|t| t.0).sum();
    let total: usize = tally.iter().map(|t| t.1).sum();
    let secs = start.elapsed().as_secs_f64();
    let frac = hits as f64 / total as f64;
    let pass = total >= 200 && tally.iter().all(|t| t.1 > 0) && frac >= 0.9 && secs < 120.0;
    let per: Vec<String> = Morphology::ALL
        .iter()
        .zip(&tally)
        .map(|(m, t)| format!("{m:?} {}/{}", t.0, t.1))
        .collect();
    verdict(
        7,
        pass,
        format!("{hits}/{total} = {:.1}% within tolerance [{}], {secs:.1} s", 100.0 * frac, per.join(", ")),
    );
}

/// Runs the command line in-process, exactly as the binary would.
fn cli(args: &[&str]) {
    let code = defectometer::run_from(["defectometer", "--quiet"].iter().chain(args));
    assert_eq!(code, 0, "{args:?} exited with {code}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn criterion_8_evaluation_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    cli(&[
        "synth", "--random", "12", "--seed", "300", "--per-morphology", "3", "--out-dir", p(&fx),
        "--detections", "--jitter-iou", "0.7", "--flip-prob", "0.15", "--miss-prob", "0.2",
        "--spurious-rate", "1.5",
    ]);
    let ann = fx.join("annotations.json");

    // Expected counts straight from the logged draws.
    let logs = json(&fx.join("perturb_log.json"));
    let (mut kept, mut missed, mut flipped, mut spurious) = (0u64, 0u64, 0u64, 0u64);
    for log in logs.as_array().unwrap() {
        for o in log["labels"].as_array().unwrap() {
            match o["outcome"].as_str().unwrap() {
                "missed" => missed += 1,
                _ => {
                    kept += 1;
                    flipped += o["flipped"].as_bool().unwrap() as u64;
                }
            }
        }
        spurious += log["spurious"].as_array().unwrap().len() as u64;
    }

    let ev = dir.path().join("ev");
    cli(&["evaluate", "--in", p(&ann), "--out", p(&ev)]);
    let m = json(&ev.join("metrics.json"));
    let counts: Vec<Vec<u64>> = m["confusion"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect())
        .collect();
    let off_diagonal: u64 = (0..3).flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| counts[i][j]).sum();
    let recall = m["recall"].as_f64().unwrap();
    let precision = m["precision"].as_f64().unwrap();
    let exact = m["tp"].as_u64() == Some(kept)
        && m["fn"].as_u64() == Some(missed)
        && m["fp"].as_u64() == Some(spurious)
        && off_diagonal == flipped
        && recall == kept as f64 / (kept + missed) as f64
        && precision == kept as f64 / (kept + spurious) as f64;

    let sw = dir.path().join("sw");
    cli(&["sweep", "--in", p(&ann), "--out", p(&sw)]);
    let mut reader = csv::Reader::from_path(sw.join("grid.csv")).unwrap();
    let recalls: Vec<f64> = reader.records().map(|r| r.unwrap()[6].parse().unwrap()).collect();
    let (ns, ni) = (DEFAULT_SCORE_THRESHOLDS.len(), DEFAULT_IOU_THRESHOLDS.len());
    let r = |s: usize, t: usize| recalls[s * ni + t];
    let mut monotone = recalls.len() == 135;
    for s in 0..ns {
        for t in 0..ni {
            if s + 1 < ns {
                monotone &= r(s + 1, t) <= r(s, t);
            }
            if t + 1 < ni {
                monotone &= r(s, t + 1) <= r(s, t);
            }
        }
    }
    let (lo, hi) = (recalls.iter().cloned().fold(1.0, f64::min), r(0, 0));
    verdict(
        8,
        exact && monotone,
        format!(
            "tp/fn/fp/off-diagonal = {kept}/{missed}/{spurious}/{flipped} (log) vs {}/{}/{}/{off_diagonal} (evaluate); \
             recall {recall:.4}, precision {precision:.4}; {}-cell grid recall {hi:.3}→{lo:.3}, monotone: {monotone}",
            m["tp"], m["fn"], m["fp"], recalls.len()
        ),
    );
}

#[test]
fn criterion_9_pipeline_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    cli(&[
        "synth", "--random", "6", "--seed", "900", "--out-dir", p(&fx), "--detections", "--jitter-iou", "0.8",
        "--miss-prob", "0.1", "--flip-prob", "0.1", "--spurious-rate", "1",
    ]);
    let ann = fx.join("annotations.json");
    let out = dir.path().join("out");
    let files = ["report.json", "report.json.manifest.json", "truth.csv", "predicted.csv"];
    let snapshot = |jobs: &str| -> Vec<Vec<u8>> {
        let _ = std::fs::remove_dir_all(&out);
        cli(&[
            "--jobs", jobs, "pipeline", "--in", p(&ann), "--out", p(&out.join("report.json")),
            "--geometry-dir", p(&out),
        ]);
        files.iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect()
    };
    let first = snapshot("1");
    let again = snapshot("1");
    let wide = snapshot("8");
    let differing: Vec<&str> = files
        .iter()
        .enumerate()
        .filter(|&(i, _)| first[i] != again[i] || first[i] != wide[i])
        .map(|(_, f)| *f)
        .collect();
    let bytes: usize = first.iter().map(Vec::len).sum();
    verdict(
        9,
        differing.is_empty(),
        format!("{} files ({bytes} bytes) compared across 2 runs at --jobs 1 and 1 at --jobs 8; differing: {differing:?}", files.len()),
    );
}
