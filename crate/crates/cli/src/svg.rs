//! Minimal line chart: precision and recall against IoU threshold.

use std::fmt::Write;

const W: f64 = 560.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn px(x: f64, y: f64) -> (f64, f64) {
    (LEFT + x * (W - LEFT - RIGHT), H - BOTTOM - y * (H - TOP - BOTTOM))
}

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], color: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let (a, b) = px(x, y);
            format!("{a:.2},{b:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
        pts.join(" ")
    );
    for p in &pts {
        let (cx, cy) = p.split_once(',').expect("formatted above");
        let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
    }
}

/// Both axes span [0, 1].
pub fn precision_recall_chart(title: &str, ious: &[f64], precision: &[f64], recall: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let (x, y0) = px(t, 0.0);
        let (x0, y) = px(0.0, t);
        let (x1, _) = px(1.0, t);
        let (_, y1) = px(t, 1.0);
        let _ = writeln!(s, r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.1}</text>"#, x0 - 6.0, y + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.1}</text>"#, y0 + 18.0);
    }
    let (ox, oy) = px(0.0, 0.0);
    let (ex, ey) = px(1.0, 1.0);
    let _ = writeln!(s, r#"<rect x="{ox:.2}" y="{ey:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, ex - ox, oy - ey);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">IoU threshold</text>"#, (ox + ex) / 2.0, H - 12.0);
    polyline(&mut s, ious, precision, "#1f77b4");
    polyline(&mut s, ious, recall, "#d62728");
    for (k, (name, color)) in [("precision", "#1f77b4"), ("recall", "#d62728")].iter().enumerate() {
        let y = TOP + 20.0 + 22.0 * k as f64;
        let x = W - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 24.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, x + 30.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let s = precision_recall_chart("t", &[0.1, 0.5, 0.9], &[0.9, 0.8, 0.2], &[1.0, 0.7, 0.1]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert_eq!(s.matches("<circle").count(), 6);
    }
}
