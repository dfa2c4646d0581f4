//! Inferential statistics built on the regularized incomplete beta function:
//! Student-t and F tail probabilities, the paired t-test and the two-way
//! repeated-measures ANOVA.

use serde::Serialize;

use crate::error::{domain, Error, Result};

const CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Default significance level.
pub const ALPHA: f64 = 0.05;

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Degenerate(format!(
        "incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )))
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(domain(format!(
            "beta parameters must be > 0 (a={a}, b={b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("x must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a)? / b)
    }
}

/// Two-sided p-value of a Student-t statistic.
pub fn t_two_tailed_p(t: f64, df: f64) -> Result<f64> {
    if !(df >= 1.0) {
        return Err(domain(format!("degrees of freedom must be >= 1, got {df}")));
    }
    if t.is_nan() {
        return Err(domain("t statistic is NaN"));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    reg_inc_beta(df / (df + t * t), df / 2.0, 0.5)
}

/// Upper-tail probability of an F(df1, df2) statistic.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if !(df1 >= 1.0 && df2 >= 1.0) {
        return Err(domain(format!(
            "degrees of freedom must be >= 1 ({df1}, {df2})"
        )));
    }
    if !(f >= 0.0) {
        return Err(domain(format!("F must be >= 0, got {f}")));
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub mean_difference: f64,
}

/// Paired t-test of `a − b`.
///
/// Differences with zero spread are reported as [`Error::Degenerate`], with
/// the sign of the mean difference in the message.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(domain(format!(
            "series lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(domain("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 || sd <= 1e-14 * mean.abs() {
        let sign = if mean > 0.0 {
            "positive"
        } else if mean < 0.0 {
            "negative"
        } else {
            "zero"
        };
        return Err(Error::Degenerate(format!(
            "paired differences have zero variance (mean difference {sign})"
        )));
    }
    let t = mean / (sd / nf.sqrt());
    let df = n - 1;
    Ok(TTest {
        t,
        df,
        p: t_two_tailed_p(t, df as f64)?,
        mean_difference: mean,
    })
}

/// Balanced within-subject data: one value per (subject, A level, B level).
///
/// Replicates of a cell are averaged before analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RmDataset {
    pub factor_a: String,
    pub factor_b: String,
    subjects: usize,
    levels_a: usize,
    levels_b: usize,
    cells: Vec<f64>,
}

impl RmDataset {
    /// `observations` are (subject, a, b, value) with zero-based indices.
    pub fn from_observations(
        factor_a: impl Into<String>,
        factor_b: impl Into<String>,
        observations: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let subjects = observations.iter().map(|o| o.0 + 1).max().unwrap_or(0);
        let levels_a = observations.iter().map(|o| o.1 + 1).max().unwrap_or(0);
        let levels_b = observations.iter().map(|o| o.2 + 1).max().unwrap_or(0);
        let size = subjects * levels_a * levels_b;
        let mut sums = vec![0.0; size];
        let mut counts = vec![0usize; size];
        for &(s, a, b, v) in observations {
            if !v.is_finite() {
                return Err(domain("non-finite observation"));
            }
            let k = (s * levels_a + a) * levels_b + b;
            sums[k] += v;
            counts[k] += 1;
        }
        let reps = counts.first().copied().unwrap_or(0);
        if reps == 0 || counts.iter().any(|&c| c != reps) {
            return Err(domain(
                "unbalanced design: every subject needs the same number of observations in every cell",
            ));
        }
        let ds = RmDataset {
            factor_a: factor_a.into(),
            factor_b: factor_b.into(),
            subjects,
            levels_a,
            levels_b,
            cells: sums.into_iter().map(|s| s / reps as f64).collect(),
        };
        ds.check_shape()?;
        Ok(ds)
    }

    fn check_shape(&self) -> Result<()> {
        if self.subjects < 2 || self.levels_a < 2 || self.levels_b < 2 {
            return Err(domain(format!(
                "need >= 2 subjects and >= 2 levels per factor (got {} x {} x {})",
                self.subjects, self.levels_a, self.levels_b
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.subjects, self.levels_a, self.levels_b)
    }

    fn y(&self, s: usize, a: usize, b: usize) -> f64 {
        self.cells[(s * self.levels_a + a) * self.levels_b + b]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaEffect {
    pub name: String,
    pub sum_of_squares: f64,
    pub df: usize,
    pub mean_square: f64,
    pub error_sum_of_squares: f64,
    pub error_df: usize,
    pub f: f64,
    pub p: f64,
    /// F was 0/0 and has been reported as 0 with p = 1.
    pub degenerate: bool,
}

impl AnovaEffect {
    pub fn significant(&self, alpha: f64) -> bool {
        !self.degenerate && self.p < alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    pub effects: Vec<AnovaEffect>,
    pub subject_sum_of_squares: f64,
    pub alpha: f64,
}

fn effect(name: String, ss: f64, df: usize, ss_err: f64, df_err: usize) -> Result<AnovaEffect> {
    let ms = ss / df as f64;
    let ms_err = ss_err / df_err as f64;
    // Sums of squares this small are rounding noise around an exact zero.
    let scale = 1e-24;
    let (f, p, degenerate) = if ms_err <= scale {
        if ms <= scale {
            (0.0, 1.0, true)
        } else {
            (f64::INFINITY, 0.0, false)
        }
    } else {
        let f = ms / ms_err;
        (f, f_sf(f, df as f64, df_err as f64)?, false)
    };
    Ok(AnovaEffect {
        name,
        sum_of_squares: ss,
        df,
        mean_square: ms,
        error_sum_of_squares: ss_err,
        error_df: df_err,
        f,
        p,
        degenerate,
    })
}

/// Two-way within-subject ANOVA; each effect is tested against its own
/// effect × subject interaction. No sphericity correction is applied.
pub fn rm_anova_two_way(data: &RmDataset) -> Result<AnovaTable> {
    data.check_shape()?;
    let (ns, na, nb) = data.shape();
    let (fs, fa, fb) = (ns as f64, na as f64, nb as f64);

    let grand = data.cells.iter().sum::<f64>() / (fs * fa * fb);
    let mut m_s = vec![0.0; ns];
    let mut m_a = vec![0.0; na];
    let mut m_b = vec![0.0; nb];
    let mut m_ab = vec![0.0; na * nb];
    let mut m_as = vec![0.0; na * ns];
    let mut m_bs = vec![0.0; nb * ns];
    for s in 0..ns {
        for a in 0..na {
            for b in 0..nb {
                let y = data.y(s, a, b);
                m_s[s] += y / (fa * fb);
                m_a[a] += y / (fs * fb);
                m_b[b] += y / (fs * fa);
                m_ab[a * nb + b] += y / fs;
                m_as[a * ns + s] += y / fb;
                m_bs[b * ns + s] += y / fa;
            }
        }
    }

    let ss_a = fb * fs * m_a.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = fa * fs * m_b.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_subj = fa * fb * m_s.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let (mut ss_ab, mut ss_as, mut ss_bs, mut ss_abs) = (0.0, 0.0, 0.0, 0.0);
    for a in 0..na {
        for b in 0..nb {
            ss_ab += fs * (m_ab[a * nb + b] - m_a[a] - m_b[b] + grand).powi(2);
        }
        for s in 0..ns {
            ss_as += fb * (m_as[a * ns + s] - m_a[a] - m_s[s] + grand).powi(2);
        }
    }
    for b in 0..nb {
        for s in 0..ns {
            ss_bs += fa * (m_bs[b * ns + s] - m_b[b] - m_s[s] + grand).powi(2);
        }
    }
    for s in 0..ns {
        for a in 0..na {
            for b in 0..nb {
                let r = data.y(s, a, b) - m_ab[a * nb + b] - m_as[a * ns + s] - m_bs[b * ns + s]
                    + m_a[a]
                    + m_b[b]
                    + m_s[s]
                    - grand;
                ss_abs += r * r;
            }
        }
    }

    // Sums of squares at rounding-noise level are exact zeros in disguise.
    let scale = data.cells.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let floor = data.cells.len() as f64 * (1e-12 * scale).powi(2);
    let snap = |ss: f64| if ss <= floor { 0.0 } else { ss };
    let (ss_a, ss_b, ss_ab) = (snap(ss_a), snap(ss_b), snap(ss_ab));
    let (ss_as, ss_bs, ss_abs) = (snap(ss_as), snap(ss_bs), snap(ss_abs));

    let df_s = ns - 1;
    let (df_a, df_b) = (na - 1, nb - 1);
    let effects = vec![
        effect(data.factor_a.clone(), ss_a, df_a, ss_as, df_a * df_s)?,
        effect(data.factor_b.clone(), ss_b, df_b, ss_bs, df_b * df_s)?,
        effect(
            format!("{}:{}", data.factor_a, data.factor_b),
            ss_ab,
            df_a * df_b,
            ss_abs,
            df_a * df_b * df_s,
        )?,
    ];
    Ok(AnovaTable {
        effects,
        subject_sum_of_squares: ss_subj,
        alpha: ALPHA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn beta_boundaries_and_symmetry() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        for a in [0.1, 0.5, 1.0, 3.7, 40.0, 250.0] {
            assert!(
                (reg_inc_beta(0.5, a, a).unwrap() - 0.5).abs() <= 1e-12,
                "a={a}"
            );
        }
    }

    #[test]
    fn beta_polynomial_case() {
        // Beta(2,3) CDF = 6x² − 8x³ + 3x⁴; at x = 1/4 that is 67/256 exactly.
        let x: f64 = 0.25;
        let poly = 6.0 * x.powi(2) - 8.0 * x.powi(3) + 3.0 * x.powi(4);
        assert_eq!(poly, 0.26171875);
        assert!((reg_inc_beta(0.25, 2.0, 3.0).unwrap() - 0.26171875).abs() <= 1e-12);
    }

    #[test]
    fn beta_domain_errors() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
        assert!(reg_inc_beta(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-14
        );
        assert_relative_eq!(ln_gamma(0.1), 2.252712651734206, epsilon = 1e-13);
    }

    #[test]
    fn t_tail_examples() {
        assert_eq!(t_two_tailed_p(0.0, 10.0).unwrap(), 1.0);
        assert!((t_two_tailed_p(2.654, 34.0).unwrap() - 0.012).abs() <= 5e-4);
        assert!((t_two_tailed_p(2.825, 34.0).unwrap() - 0.0079).abs() <= 5e-4);
        assert_eq!(
            t_two_tailed_p(1.3, 7.0).unwrap(),
            t_two_tailed_p(-1.3, 7.0).unwrap()
        );
        assert!(t_two_tailed_p(1.0, 0.5).is_err());
    }

    #[test]
    fn f_tail_examples() {
        assert_eq!(f_sf(0.0, 5.0, 170.0).unwrap(), 1.0);
        let p = f_sf(9.459, 5.0, 170.0).unwrap();
        assert!(((p - 5.653e-8) / 5.653e-8).abs() <= 0.02, "{p}");
        assert!((f_sf(1.027, 5.0, 170.0).unwrap() - 0.404).abs() <= 0.005);
        assert!(f_sf(-1.0, 1.0, 1.0).is_err());
        assert!(f_sf(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn paired_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let zeros = [0.0; 5];
        let r = paired_t_test(&a, &zeros).unwrap();
        // mean 3, sd √2.5 → t = 3 / (√2.5 / √5) = 3√2.
        assert_relative_eq!(r.t, 3.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.df, 4);
        assert!((r.p - 0.013235599563682695).abs() < 1e-10);
        assert!(matches!(paired_t_test(&a, &a), Err(Error::Degenerate(_))));
        let shifted: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let err = paired_t_test(&shifted, &a).unwrap_err();
        assert!(err.to_string().contains("positive"));
        assert!(paired_t_test(&a, &a[..3]).is_err());
        let ac: Vec<f64> = a.iter().map(|v| v * 7.5).collect();
        let bc: Vec<f64> = zeros.iter().map(|v| v * 7.5).collect();
        assert_relative_eq!(paired_t_test(&ac, &bc).unwrap().t, r.t, epsilon = 1e-12);
    }

    #[test]
    fn anova_constant_data_is_degenerate() {
        let obs: Vec<_> = (0..3)
            .flat_map(|s| (0..2).flat_map(move |a| (0..2).map(move |b| (s, a, b, 4.2))))
            .collect();
        let t = rm_anova_two_way(&RmDataset::from_observations("A", "B", &obs).unwrap()).unwrap();
        for e in &t.effects {
            assert_eq!(e.sum_of_squares, 0.0);
            assert_eq!((e.f, e.p), (0.0, 1.0));
            assert!(e.degenerate && !e.significant(0.05));
        }
    }

    #[test]
    fn anova_rejects_unbalanced() {
        let mut obs: Vec<_> = (0..3)
            .flat_map(|s| {
                (0..2).flat_map(move |a| (0..2).map(move |b| (s, a, b, (s + a + b) as f64)))
            })
            .collect();
        obs.pop();
        assert!(RmDataset::from_observations("A", "B", &obs).is_err());
        let single_level: Vec<_> = (0..3)
            .flat_map(|s| (0..2).map(move |b| (s, 0, b, 1.0)))
            .collect();
        assert!(RmDataset::from_observations("A", "B", &single_level).is_err());
    }

    fn random_design() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>)> {
        (2usize..5, 2usize..4, 2usize..4).prop_flat_map(|(s, a, b)| {
            proptest::collection::vec(-10.0f64..10.0, s * a * b).prop_map(move |v| (s, a, b, v))
        })
    }

    fn to_obs(s: usize, a: usize, b: usize, v: &[f64]) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for si in 0..s {
            for ai in 0..a {
                for bi in 0..b {
                    out.push((si, ai, bi, v[(si * a + ai) * b + bi]));
                }
            }
        }
        out
    }

    fn fs(t: &AnovaTable) -> Vec<f64> {
        t.effects.iter().map(|e| e.f).collect()
    }

    proptest! {
        #[test]
        fn beta_reflection(x in 0.0f64..1.0, a in 0.05f64..60.0, b in 0.05f64..60.0) {
            let lhs = reg_inc_beta(x, a, b).unwrap() + reg_inc_beta(1.0 - x, b, a).unwrap();
            prop_assert!((lhs - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn f_t_consistency(t in -8.0f64..8.0, df in 1usize..200) {
            let a = f_sf(t * t, 1.0, df as f64).unwrap();
            let b = t_two_tailed_p(t, df as f64).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
        }

        #[test]
        fn t_tail_decreasing(t1 in 0.0f64..10.0, dt in 0.01f64..2.0, df in 1usize..100) {
            let p1 = t_two_tailed_p(t1, df as f64).unwrap();
            let p2 = t_two_tailed_p(t1 + dt, df as f64).unwrap();
            prop_assert!(p2 < p1);
        }

        #[test]
        fn anova_offsets_and_scale((s, a, b, v) in random_design(),
                                   offs in proptest::collection::vec(-50.0f64..50.0, 4),
                                   c in 0.1f64..20.0, g in -100.0f64..100.0) {
            let base = rm_anova_two_way(&RmDataset::from_observations("A", "B", &to_obs(s, a, b, &v)).unwrap()).unwrap();
            let shifted: Vec<_> = to_obs(s, a, b, &v).into_iter().map(|(si, ai, bi, y)| (si, ai, bi, y + offs[si] + g)).collect();
            let scaled: Vec<_> = to_obs(s, a, b, &v).into_iter().map(|(si, ai, bi, y)| (si, ai, bi, y * c)).collect();
            let t1 = rm_anova_two_way(&RmDataset::from_observations("A", "B", &shifted).unwrap()).unwrap();
            let t2 = rm_anova_two_way(&RmDataset::from_observations("A", "B", &scaled).unwrap()).unwrap();
            for ((f0, f1), f2) in fs(&base).iter().zip(fs(&t1)).zip(fs(&t2)) {
                prop_assert!((f0 - f1).abs() <= 1e-6 * (1.0 + f0.abs()));
                prop_assert!((f0 - f2).abs() <= 1e-6 * (1.0 + f0.abs()));
            }
        }
    }

    #[test]
    fn agrees_with_statrs_on_a_grid() {
        use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
        use statrs::function::beta::beta_reg;
        for a in [0.3, 1.0, 2.5, 17.0, 85.0] {
            for b in [0.5, 1.0, 4.0, 30.0] {
                for x in [0.01, 0.2, 0.5, 0.77, 0.99] {
                    let ours = reg_inc_beta(x, a, b).unwrap();
                    assert!((ours - beta_reg(a, b, x)).abs() <= 1e-10, "I_{x}({a},{b})");
                }
            }
        }
        for df in [1.0, 3.0, 34.0, 170.0] {
            let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for t in [0.1, 1.0, 2.654, 6.0] {
                let want = 2.0 * t_dist.sf(t);
                assert!((t_two_tailed_p(t, df).unwrap() - want).abs() <= 1e-10 * want.max(1e-3));
            }
            let f_dist = FisherSnedecor::new(5.0, df).unwrap();
            for f in [0.2, 1.027, 3.0, 9.459] {
                let want = f_dist.sf(f);
                assert!((f_sf(f, 5.0, df).unwrap() - want).abs() <= 1e-9 * want.max(1e-6));
            }
        }
    }

    #[test]
    fn normal_limit() {
        // 2·(1 − Φ(1.5)) from the complementary error function.
        let normal = 0.13361440253771614;
        assert!((t_two_tailed_p(1.5, 1e6).unwrap() - normal).abs() <= 1e-6);
    }
}
