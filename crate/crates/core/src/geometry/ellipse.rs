//! Direct least-squares ellipse fitting.
//!
//! The conic `A x² + B xy + C y² + D x + E y + F = 0` is fitted under the
//! ellipse-specific normalization `4AC - B² = 1`, using the numerically stable
//! block decomposition of the scatter matrix (quadratic and linear parts
//! solved separately). Points are centered and scaled before fitting.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Ellipse in center / semi-axes / orientation form.
///
/// `theta` is the angle of the major axis from +x, in `[0, π)`; with y
/// pointing down a positive angle turns clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl EllipseFit {
    /// Builds an ellipse, swapping axes so that `a >= b` and normalizing the angle.
    pub fn new(cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Result<Self, GeometryError> {
        if !(a > 0.0 && b > 0.0) || ![cx, cy, a, b, theta].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::DegenerateFit(format!(
                "invalid ellipse parameters a={a}, b={b}"
            )));
        }
        let (a, b, theta) = if a >= b { (a, b, theta) } else { (b, a, theta + PI / 2.0) };
        Ok(Self { cx, cy, a, b, theta: normalize_angle(theta) })
    }

    /// Point at parametric angle `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (u, v) = (self.a * t.cos(), self.b * t.sin());
        (self.cx + u * c - v * s, self.cy + u * s + v * c)
    }

    /// `n` points evenly spaced in the parametric angle.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| self.point_at(2.0 * PI * i as f64 / n as f64))
            .collect()
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }

    /// Half-extents of the axis-aligned bounding rectangle.
    pub fn half_extents(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            ((self.a * c).powi(2) + (self.b * s).powi(2)).sqrt(),
            ((self.a * s).powi(2) + (self.b * c).powi(2)).sqrt(),
        )
    }

    /// Normalized radius `ρ` of a point; `ρ <= 1` inside the ellipse.
    pub fn normalized_radius(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }
}

/// Wraps an angle into `[0, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Conic coefficients `[A, B, C, D, E, F]`.
pub type Conic = [f64; 6];

/// Fits an ellipse to at least five non-collinear points.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<EllipseFit, GeometryError> {
    if points.len() < 5 {
        return Err(GeometryError::DegenerateFit(format!(
            "need at least 5 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let scale = (points
        .iter()
        .map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2))
        .sum::<f64>()
        / (2.0 * n))
        .sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GeometryError::DegenerateFit("points coincide".into()));
    }
    let norm: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.0 - mx) / scale, (p.1 - my) / scale))
        .collect();

    // Collinearity: smallest eigenvalue of the (unit-scaled) covariance.
    let (sxx, sxy, syy) = norm.iter().fold((0.0, 0.0, 0.0), |acc, p| {
        (acc.0 + p.0 * p.0, acc.1 + p.0 * p.1, acc.2 + p.1 * p.1)
    });
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);
    let min_eig = 0.5 * (sxx + syy) - (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    if min_eig < 1e-10 {
        return Err(GeometryError::DegenerateFit("points are collinear".into()));
    }

    let conic = fit_conic_normalized(&norm)?;
    let e = conic_to_ellipse(&conic)?;
    EllipseFit::new(e.cx * scale + mx, e.cy * scale + my, e.a * scale, e.b * scale, e.theta)
}

fn fit_conic_normalized(pts: &[(f64, f64)]) -> Result<Conic, GeometryError> {
    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for &(x, y) in pts {
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateFit("singular linear scatter".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
    let reduced = Matrix3::from_rows(&[
        (m.row(2) / 2.0).into_owned(),
        (-m.row(1)).into_owned(),
        (m.row(0) / 2.0).into_owned(),
    ]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in reduced.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint <= 0.0 {
            continue;
        }
        // Algebraic residual per unit constraint; the true ellipse minimizes it.
        let residual = (v.transpose() * m * v)[0].abs() / constraint;
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, v));
        }
    }
    let (_, a1) = best.ok_or_else(|| GeometryError::DegenerateFit("no elliptical solution".into()))?;
    let a2 = t * a1;
    Ok([a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]])
}

/// Null vector of a rank-deficient 3×3 matrix from the best-conditioned
/// cross product of two of its rows.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows: [Vector3<f64>; 3] = [
        m.row(0).transpose(),
        m.row(1).transpose(),
        m.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let n = best.norm();
    if n > 0.0 && n.is_finite() {
        Some(best / n)
    } else {
        None
    }
}

/// Converts general conic coefficients into center/axes/angle form.
pub fn conic_to_ellipse(conic: &Conic) -> Result<EllipseFit, GeometryError> {
    let mut c = *conic;
    if c[0] + c[2] < 0.0 {
        c.iter_mut().for_each(|v| *v = -*v);
    }
    let [a, b, cc, d, e, f] = c;
    let det = 4.0 * a * cc - b * b;
    if !(det > 0.0) {
        return Err(GeometryError::DegenerateFit("conic is not an ellipse".into()));
    }
    let cx = (b * e - 2.0 * cc * d) / det;
    let cy = (b * d - 2.0 * a * e) / det;
    let f0 = f + 0.5 * (d * cx + e * cy);
    let mean = 0.5 * (a + cc);
    let radius = (0.25 * (a - cc).powi(2) + 0.25 * b * b).sqrt();
    let (l_min, l_max) = (mean - radius, mean + radius);
    if !(l_min > 0.0) || !(-f0 > 0.0) {
        return Err(GeometryError::DegenerateFit("imaginary ellipse".into()));
    }
    let semi_major = (-f0 / l_min).sqrt();
    let semi_minor = (-f0 / l_max).sqrt();
    let theta = 0.5 * (-b).atan2(cc - a);
    EllipseFit::new(cx, cy, semi_major, semi_minor, theta)
}

/// Conic coefficients of an ellipse (scaled so that `F` matches the implicit form).
pub fn ellipse_to_conic(e: &EllipseFit) -> Conic {
    let (s, c) = e.theta.sin_cos();
    let (ia, ib) = (1.0 / (e.a * e.a), 1.0 / (e.b * e.b));
    let a = c * c * ia + s * s * ib;
    let b = 2.0 * s * c * (ia - ib);
    let cc = s * s * ia + c * c * ib;
    let d = -2.0 * a * e.cx - b * e.cy;
    let ee = -b * e.cx - 2.0 * cc * e.cy;
    let f = a * e.cx * e.cx + b * e.cx * e.cy + cc * e.cy * e.cy - 1.0;
    [a, b, cc, d, ee, f]
}

/// Smallest distance between two orientations modulo π.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}
