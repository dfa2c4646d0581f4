//! Landing-accuracy statistics: displacement summaries, containment
//! diameters for pad sizing, and least-squares landing-axis fits.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::condition::ConditionSpec;
use crate::error::{domain, Error, Result};
use crate::geometry::Vec2;

/// One drone touchdown relative to its pad.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingRecord {
    pub condition: ConditionSpec,
    pub pad: usize,
    /// Plate center → touchdown, pad frame, m.
    pub displacement: Vec2,
}

/// Displacement magnitude summary, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisplacementStats {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two records.
    pub std_deviation: Option<f64>,
    pub maximum: f64,
    pub n: usize,
}

pub fn group_stats(records: &[LandingRecord]) -> Result<DisplacementStats> {
    if records.is_empty() {
        return Err(domain("no landings in group"));
    }
    let mm: Vec<f64> = records
        .iter()
        .map(|r| r.displacement.norm() * 1000.0)
        .collect();
    let n = mm.len();
    let mean = mm.iter().sum::<f64>() / n as f64;
    let std_deviation = (n >= 2).then(|| {
        let ss: f64 = mm.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    let maximum = mm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DisplacementStats {
        mean,
        std_deviation,
        maximum,
        n,
    })
}

/// Reference point for containment circles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    #[default]
    PlateCenter,
    MeanLandingPoint,
}

impl FromStr for CenterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plate" | "plate_center" => Ok(CenterMode::PlateCenter),
            "mean" | "mean_landing_point" => Ok(CenterMode::MeanLandingPoint),
            other => Err(Error::Config(format!("unknown center mode {other:?}"))),
        }
    }
}

/// Nearest-rank `q`-quantile: the `⌈q·n⌉`-th smallest value.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(domain("quantile of an empty set"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(domain(format!("quantile must lie in (0, 1], got {q}")));
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Diameter (m) of the circle about the chosen center that holds a `q`
/// fraction of the landings.
pub fn containment_diameter(records: &[LandingRecord], q: f64, center: CenterMode) -> Result<f64> {
    if records.is_empty() {
        return Err(domain("no landings in group"));
    }
    let c = match center {
        CenterMode::PlateCenter => Vec2::zeros(),
        CenterMode::MeanLandingPoint => {
            records.iter().map(|r| r.displacement).sum::<Vec2>() / records.len() as f64
        }
    };
    let mut radii: Vec<f64> = records
        .iter()
        .map(|r| (r.displacement - c).norm())
        .collect();
    radii.sort_by(f64::total_cmp);
    Ok(2.0 * nearest_rank(&radii, q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of landing y on landing x (pad frame).
pub fn landing_axis_regression(records: &[LandingRecord]) -> Result<AxisFit> {
    let n = records.len();
    if n < 2 {
        return Err(domain("regression needs at least two landings"));
    }
    let nf = n as f64;
    let mx = records.iter().map(|r| r.displacement.x).sum::<f64>() / nf;
    let my = records.iter().map(|r| r.displacement.y).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for r in records {
        let dx = r.displacement.x - mx;
        let dy = r.displacement.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "all landings share one x coordinate; the landing axis is vertical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(AxisFit {
        intercept,
        slope,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::{Feedback, SpeedClass};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn cond() -> ConditionSpec {
        ConditionSpec::new(Feedback::Tactile, SpeedClass::Slow, 1).unwrap()
    }

    fn rec(x: f64, y: f64) -> LandingRecord {
        LandingRecord {
            condition: cond(),
            pad: 0,
            displacement: Vec2::new(x, y),
        }
    }

    #[test]
    fn stats_examples() {
        let one = group_stats(&[rec(0.010, 0.0)]).unwrap();
        assert_relative_eq!(one.mean, 10.0, epsilon = 1e-12);
        assert_relative_eq!(one.maximum, 10.0, epsilon = 1e-12);
        assert!(one.std_deviation.is_none());
        let s = group_stats(&[rec(0.003, 0.0), rec(0.0, -0.004), rec(0.003, 0.004)]).unwrap();
        assert_relative_eq!(s.mean, 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.std_deviation.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.maximum, 5.0, epsilon = 1e-12);
        assert!(group_stats(&[]).is_err());
    }

    #[test]
    fn rayleigh_mean_of_gaussian_scatter() {
        let sigma = 0.01;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let recs: Vec<_> = (0..10_000)
            .map(|_| rec(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let s = group_stats(&recs).unwrap();
        let rayleigh_mm = sigma * (std::f64::consts::PI / 2.0).sqrt() * 1000.0;
        assert!((s.mean - rayleigh_mm).abs() / rayleigh_mm < 0.01);
    }

    #[test]
    fn containment_examples() {
        let recs: Vec<_> = (1..=10).map(|k| rec(k as f64 * 0.001, 0.0)).collect();
        assert_relative_eq!(
            containment_diameter(&recs, 0.9, CenterMode::PlateCenter).unwrap(),
            0.018,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            containment_diameter(&recs, 1.0, CenterMode::PlateCenter).unwrap(),
            0.020,
            epsilon = 1e-15
        );
        let cluster = vec![rec(0.02, -0.01); 6];
        assert_eq!(
            containment_diameter(&cluster, 0.9, CenterMode::MeanLandingPoint).unwrap(),
            0.0
        );
        assert!(containment_diameter(&[], 0.9, CenterMode::PlateCenter).is_err());
        assert!(containment_diameter(&recs, 0.0, CenterMode::PlateCenter).is_err());
        assert!(containment_diameter(&recs, 1.2, CenterMode::PlateCenter).is_err());
    }

    #[test]
    fn center_modes_agree_when_mean_is_plate_center() {
        let recs = vec![
            rec(0.01, 0.0),
            rec(-0.01, 0.0),
            rec(0.0, 0.02),
            rec(0.0, -0.02),
        ];
        let a = containment_diameter(&recs, 0.75, CenterMode::PlateCenter).unwrap();
        let b = containment_diameter(&recs, 0.75, CenterMode::MeanLandingPoint).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn exact_line_fit() {
        let recs: Vec<_> = [-0.02, 0.0, 0.01, 0.03]
            .iter()
            .map(|&x| rec(x, 2.0 * x + 0.01))
            .collect();
        let f = landing_axis_regression(&recs).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 0.01, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_cloud_has_zero_slope() {
        let recs = vec![
            rec(0.01, 0.02),
            rec(0.01, -0.02),
            rec(-0.03, 0.01),
            rec(-0.03, -0.01),
        ];
        assert_eq!(landing_axis_regression(&recs).unwrap().slope, 0.0);
    }

    #[test]
    fn five_points_match_normal_equations() {
        // Frozen from solving [n Σx; Σx Σx²][b0 b1]ᵀ = [Σy Σxy]ᵀ offline.
        let xs = [0.0, 0.01, 0.025, -0.02, 0.04];
        let ys = [0.003, 0.012, 0.02, -0.01, 0.031];
        let recs: Vec<_> = xs.iter().zip(&ys).map(|(&x, &y)| rec(x, y)).collect();
        let f = landing_axis_regression(&recs).unwrap();
        assert!((f.intercept - 0.0037075471698113176).abs() <= 1e-12);
        assert!((f.slope - 0.6811320754716983).abs() <= 1e-12);
        assert!((f.r_squared - 0.9967113062232794).abs() <= 1e-12);
    }

    #[test]
    fn vertical_axis_is_degenerate() {
        let recs = vec![rec(0.01, 0.0), rec(0.01, 0.02)];
        assert!(matches!(
            landing_axis_regression(&recs),
            Err(Error::Degenerate(_))
        ));
        assert!(landing_axis_regression(&recs[..1]).is_err());
    }

    fn cloud() -> impl Strategy<Value = Vec<LandingRecord>> {
        proptest::collection::vec(
            (-0.1f64..0.1, -0.1f64..0.1).prop_map(|(x, y)| rec(x, y)),
            2..40,
        )
    }

    proptest! {
        #[test]
        fn containment_monotone_in_q(recs in cloud(), q1 in 0.01f64..1.0, q2 in 0.01f64..1.0) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            for mode in [CenterMode::PlateCenter, CenterMode::MeanLandingPoint] {
                let a = containment_diameter(&recs, lo, mode).unwrap();
                let b = containment_diameter(&recs, hi, mode).unwrap();
                prop_assert!(a <= b && a >= 0.0);
            }
        }

        #[test]
        fn max_bounds_mean_and_mean_stable(recs in cloud()) {
            let s = group_stats(&recs).unwrap();
            prop_assert!(s.maximum >= s.mean);
            let mut more = recs.clone();
            more.push(rec(s.mean / 1000.0, 0.0));
            let s2 = group_stats(&more).unwrap();
            prop_assert!((s2.mean - s.mean).abs() <= 1e-9 * (1.0 + s.mean));
        }

        #[test]
        fn residuals_orthogonal(recs in cloud()) {
            if let Ok(f) = landing_axis_regression(&recs) {
                let (mut r1, mut rx) = (0.0, 0.0);
                for r in &recs {
                    let e = r.displacement.y - f.intercept - f.slope * r.displacement.x;
                    r1 += e;
                    rx += e * r.displacement.x;
                }
                prop_assert!(r1.abs() <= 1e-10 && rx.abs() <= 1e-10);
            }
        }
    }
}
