//! Per-class diameter statistics, areal density, ground-truth vs prediction
//! comparison, and the sensitivity of loop hardening to diameter error.
//!
//! Lengths are nm and areas m² for scaled geometry. Unscaled geometry (no
//! `nm_per_pixel`) is handled in pixel units throughout: pass the total area
//! in px² and read densities as px⁻².

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DefectGeometry;
use crate::types::DefectClass;

const NM2_PER_M2: f64 = 1e18;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("hardening error undefined for d = {d}, epsilon = {epsilon} (need d > 0 and d + epsilon > 0)")]
    Domain { epsilon: f64, d: f64 },
    #[error("hardening coefficient must be positive, got {0}")]
    Coefficient(f64),
    #[error("total area must be positive and finite, got {0}")]
    Area(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Defects per unit area.
    #[default]
    Count,
    /// Summed ellipse area over imaged area (dimensionless).
    AreaFraction,
}

/// Statistics of one class. With no defects the moments are `None`; the
/// sample standard deviation and SEM additionally need two defects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: DefectClass,
    pub count: usize,
    pub mean_diameter_nm: Option<f64>,
    pub sample_std_nm: Option<f64>,
    pub sem_nm: Option<f64>,
    pub areal_density_per_m2: f64,
}

fn check_area(total_area: f64) -> Result<(), StatsError> {
    if total_area > 0.0 && total_area.is_finite() {
        Ok(())
    } else {
        Err(StatsError::Area(total_area))
    }
}

fn of_class(geoms: &[DefectGeometry], class: DefectClass) -> impl Iterator<Item = &DefectGeometry> {
    geoms.iter().filter(move |g| g.class == class)
}

pub fn class_summary(
    geoms: &[DefectGeometry],
    class: DefectClass,
    total_area_m2: f64,
) -> Result<ClassSummary, StatsError> {
    check_area(total_area_m2)?;
    let d: Vec<f64> = of_class(geoms, class).map(|g| g.diameter).collect();
    let n = d.len();
    let mean = (n > 0).then(|| d.iter().sum::<f64>() / n as f64);
    let std = match (n, mean) {
        (2.., Some(m)) => {
            let ss: f64 = d.iter().map(|x| (x - m) * (x - m)).sum();
            Some((ss / (n - 1) as f64).sqrt())
        }
        _ => None,
    };
    Ok(ClassSummary {
        class,
        count: n,
        mean_diameter_nm: mean,
        sample_std_nm: std,
        sem_nm: std.map(|s| s / (n as f64).sqrt()),
        areal_density_per_m2: n as f64 / total_area_m2,
    })
}

/// Density over all classes in `geoms`.
pub fn areal_density(
    geoms: &[DefectGeometry],
    total_area_m2: f64,
    mode: DensityMode,
) -> Result<f64, StatsError> {
    check_area(total_area_m2)?;
    Ok(match mode {
        DensityMode::Count => geoms.len() as f64 / total_area_m2,
        DensityMode::AreaFraction => {
            let summed: f64 = geoms
                .iter()
                .map(|g| match g.nm_per_pixel {
                    Some(_) => g.area / NM2_PER_M2,
                    None => g.area,
                })
                .sum();
            summed / total_area_m2
        }
    })
}

/// `|pred − gt| / gt` in percent; `None` unless `gt > 0`.
pub fn relative_error_pct(gt: f64, pred: f64) -> Option<f64> {
    (gt > 0.0 && gt.is_finite() && pred.is_finite()).then(|| 100.0 * (pred - gt).abs() / gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassComparison {
    pub class: DefectClass,
    pub ground_truth: ClassSummary,
    pub predicted: ClassSummary,
    pub diameter_error_pct: Option<f64>,
    pub density_error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub total_area_m2: f64,
    pub classes: Vec<ClassComparison>,
}

impl ComparisonReport {
    pub fn class(&self, class: DefectClass) -> &ClassComparison {
        &self.classes[class.index()]
    }
}

/// Summaries of both sets per class. Each geometry counts under its own
/// class, so predictions are grouped by predicted class.
pub fn compare_reports(
    gt: &[DefectGeometry],
    pred: &[DefectGeometry],
    total_area_m2: f64,
) -> Result<ComparisonReport, StatsError> {
    let mut classes = Vec::with_capacity(3);
    for class in DefectClass::ALL {
        let g = class_summary(gt, class, total_area_m2)?;
        let p = class_summary(pred, class, total_area_m2)?;
        let diameter_error_pct = match (g.mean_diameter_nm, p.mean_diameter_nm) {
            (Some(a), Some(b)) => relative_error_pct(a, b),
            _ => None,
        };
        classes.push(ClassComparison {
            class,
            ground_truth: g,
            predicted: p,
            diameter_error_pct,
            density_error_pct: relative_error_pct(g.areal_density_per_m2, p.areal_density_per_m2),
        });
    }
    Ok(ComparisonReport { total_area_m2, classes })
}

/// Dispersed-barrier hardening `Δσ_y = A·√d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardeningModel {
    coefficient: f64,
}

impl Default for HardeningModel {
    fn default() -> Self {
        Self { coefficient: 1.0 }
    }
}

impl HardeningModel {
    pub fn new(coefficient: f64) -> Result<Self, StatsError> {
        if coefficient > 0.0 && coefficient.is_finite() {
            Ok(Self { coefficient })
        } else {
            Err(StatsError::Coefficient(coefficient))
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn delta_sigma(&self, d: f64) -> f64 {
        self.coefficient * d.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorPropagation {
    Exact,
    /// First-order expansion `ε / 2d`.
    Linearized,
}

/// Fractional change of `A·√d` when the diameter is off by `epsilon`.
pub fn hardening_fractional_error(
    epsilon: f64,
    d: f64,
    mode: ErrorPropagation,
) -> Result<f64, StatsError> {
    if !(d > 0.0 && d + epsilon > 0.0) || !epsilon.is_finite() || !d.is_finite() {
        return Err(StatsError::Domain { epsilon, d });
    }
    Ok(match mode {
        ErrorPropagation::Linearized => epsilon / (2.0 * d),
        // sqrt(1 + x) - 1 without cancellation for small x.
        ErrorPropagation::Exact => {
            let x = epsilon / d;
            x / ((1.0 + x).sqrt() + 1.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EllipseFit;
    use proptest::prelude::*;

    fn geom(class: DefectClass, diameter_px: f64, scale: f64) -> DefectGeometry {
        let e = EllipseFit::new(0.0, 0.0, diameter_px / 2.0, diameter_px / 2.0, 0.0).unwrap();
        DefectGeometry::new(class, e, Some(scale))
    }

    fn loops(d: &[f64]) -> Vec<DefectGeometry> {
        d.iter().map(|&x| geom(DefectClass::Loop111, x, 1.0)).collect()
    }

    #[test]
    fn constant_diameters() {
        let s = class_summary(&loops(&[10.0, 10.0, 10.0]), DefectClass::Loop111, 1.0).unwrap();
        assert_eq!(s.mean_diameter_nm, Some(10.0));
        assert_eq!(s.sample_std_nm, Some(0.0));
        assert_eq!(s.sem_nm, Some(0.0));
    }

    #[test]
    fn two_diameters() {
        let s = class_summary(&loops(&[8.0, 12.0]), DefectClass::Loop111, 1.0).unwrap();
        assert_eq!(s.mean_diameter_nm, Some(10.0));
        assert!((s.sample_std_nm.unwrap() - 8f64.sqrt()).abs() < 1e-12);
        assert!((s.sem_nm.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_is_marked_undefined() {
        let s = class_summary(&loops(&[5.0]), DefectClass::BlackDot, 1.0).unwrap();
        assert_eq!(s.count, 0);
        assert_eq!(s.mean_diameter_nm, None);
        assert_eq!(s.areal_density_per_m2, 0.0);
        let one = class_summary(&loops(&[5.0]), DefectClass::Loop111, 1.0).unwrap();
        assert_eq!((one.mean_diameter_nm, one.sample_std_nm), (Some(5.0), None));
    }

    #[test]
    fn count_density() {
        let g = loops(&[3.0; 10]);
        let area = 100e-9 * 100e-9;
        let s = class_summary(&g, DefectClass::Loop111, area).unwrap();
        assert!((s.areal_density_per_m2 - 1e15).abs() < 1.0);
        let d = areal_density(&loops(&[3.0; 289]), 12.0 * 290e-9 * 290e-9, DensityMode::Count).unwrap();
        assert!((d - 2.863e14).abs() < 1e11);
    }

    #[test]
    fn area_fraction_density() {
        assert_eq!(areal_density(&[], 1.0, DensityMode::AreaFraction).unwrap(), 0.0);
        assert_eq!(areal_density(&[], 1.0, DensityMode::Count).unwrap(), 0.0);
        let g = geom(DefectClass::Loop100, 20.0, 1.0);
        let total = g.area / NM2_PER_M2;
        let f = areal_density(&[g], total, DensityMode::AreaFraction).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!(areal_density(&[g], 0.0, DensityMode::Count).is_err());
    }

    #[test]
    fn relative_errors() {
        assert!((relative_error_pct(22.4, 23.1).unwrap() - 3.125).abs() < 1e-9);
        assert_eq!(relative_error_pct(0.0, 1.0), None);
        let g = loops(&[4.0, 9.0, 13.0]);
        let r = compare_reports(&g, &g, 1e-12).unwrap();
        let c = r.class(DefectClass::Loop111);
        assert_eq!((c.diameter_error_pct, c.density_error_pct), (Some(0.0), Some(0.0)));
        assert_eq!(r.class(DefectClass::BlackDot).diameter_error_pct, None);
    }

    #[test]
    fn hardening_examples() {
        let lin = hardening_fractional_error(1.7, 21.4, ErrorPropagation::Linearized).unwrap();
        assert!((lin - 1.7 / 42.8).abs() < 1e-15);
        let exact = hardening_fractional_error(1.7, 21.4, ErrorPropagation::Exact).unwrap();
        assert!((exact - ((23.1f64).sqrt() / (21.4f64).sqrt() - 1.0)).abs() < 1e-14);
        for mode in [ErrorPropagation::Exact, ErrorPropagation::Linearized] {
            assert_eq!(hardening_fractional_error(0.0, 5.0, mode).unwrap(), 0.0);
        }
        assert!(hardening_fractional_error(-3.0, 2.0, ErrorPropagation::Exact).is_err());
        assert!(hardening_fractional_error(1.0, 0.0, ErrorPropagation::Linearized).is_err());
        assert!(HardeningModel::new(0.0).is_err());
        let m = HardeningModel::new(2.0).unwrap();
        assert!((m.delta_sigma(23.1) / m.delta_sigma(21.4) - 1.0 - exact).abs() < 1e-14);
    }

    fn arb_geoms() -> impl Strategy<Value = Vec<DefectGeometry>> {
        proptest::collection::vec((0usize..3, 1.0f64..60.0), 0..30).prop_map(|v| {
            v.into_iter().map(|(c, d)| geom(DefectClass::ALL[c], d, 0.5)).collect()
        })
    }

    proptest! {
        #[test]
        fn second_order_bound(d in 0.1f64..100.0, frac in 0.0f64..1.0) {
            let eps = frac * d;
            let lin = hardening_fractional_error(eps, d, ErrorPropagation::Linearized).unwrap();
            let ex = hardening_fractional_error(eps, d, ErrorPropagation::Exact).unwrap();
            prop_assert!(lin >= ex);
            prop_assert!(lin - ex <= (eps / d).powi(2));
        }

        #[test]
        fn permutation_invariant(g in arb_geoms(), seed in any::<u64>()) {
            let mut shuffled = g.clone();
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            for class in DefectClass::ALL {
                let a = class_summary(&g, class, 1e-12).unwrap();
                let b = class_summary(&shuffled, class, 1e-12).unwrap();
                prop_assert_eq!(a.count, b.count);
                match (a.mean_diameter_nm, b.mean_diameter_nm) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12 * x),
                    (x, y) => prop_assert_eq!(x, y),
                }
                match (a.sample_std_nm, b.sample_std_nm) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.max(1e-9)),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }

        #[test]
        fn merging_weights_means(g1 in arb_geoms(), g2 in arb_geoms()) {
            let merged: Vec<DefectGeometry> = g1.iter().chain(&g2).copied().collect();
            for class in DefectClass::ALL {
                let a = class_summary(&g1, class, 1.0).unwrap();
                let b = class_summary(&g2, class, 1.0).unwrap();
                let m = class_summary(&merged, class, 1.0).unwrap();
                prop_assert_eq!(m.count, a.count + b.count);
                if m.count > 0 {
                    let weighted = (a.mean_diameter_nm.unwrap_or(0.0) * a.count as f64
                        + b.mean_diameter_nm.unwrap_or(0.0) * b.count as f64) / m.count as f64;
                    prop_assert!((m.mean_diameter_nm.unwrap() - weighted).abs() <= 1e-9 * weighted);
                }
            }
        }

        #[test]
        fn density_additive(g1 in arb_geoms(), g2 in arb_geoms(), a1 in 1e-14f64..1e-12, a2 in 1e-14f64..1e-12) {
            let merged: Vec<DefectGeometry> = g1.iter().chain(&g2).copied().collect();
            for mode in [DensityMode::Count, DensityMode::AreaFraction] {
                let d1 = areal_density(&g1, a1, mode).unwrap();
                let d2 = areal_density(&g2, a2, mode).unwrap();
                let dm = areal_density(&merged, a1 + a2, mode).unwrap();
                let pooled = (d1 * a1 + d2 * a2) / (a1 + a2);
                prop_assert!((dm - pooled).abs() <= 1e-9 * pooled.max(1e-300));
            }
        }
    }
}
