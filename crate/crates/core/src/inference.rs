//! Bootstrap quantiles, confidence intervals, bias correction and tests for
//! scalar contrasts `θ = c'β`.
//!
//! Quantiles follow the infimum definition
//! `Q̂_α = inf{Q : α ≤ P*(δ ≤ Q)}` over the empirical bootstrap law, i.e. the
//! order statistic of rank `⌈αB⌉`. The same operator is used for the median,
//! so even `B` takes the lower central order statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbb::BootstrapRun;
use crate::normal;
use crate::panel::{Contrast, WithinFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    ReversePercentile,
    Studentized,
    NormalApprox,
}

/// A closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(alpha))
    }
}

/// 1-based rank `r` of `Q̂_α`: the smallest `r` with `α ≤ r/B`.
pub fn quantile_rank(b: usize, alpha: f64) -> usize {
    let bf = b as f64;
    let mut r = ((alpha * bf).ceil() as usize).clamp(1, b);
    while r > 1 && alpha <= (r - 1) as f64 / bf {
        r -= 1;
    }
    while r < b && alpha > r as f64 / bf {
        r += 1;
    }
    r
}

/// `Q̂_α` of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    if sorted.is_empty() {
        return Err(Error::EmptyRun);
    }
    Ok(sorted[quantile_rank(sorted.len(), alpha) - 1])
}

/// `Q̂_α` of the empirical distribution of `deltas`.
pub fn bootstrap_quantile(deltas: &[f64], alpha: f64) -> Result<f64> {
    quantile_sorted(&sorted(deltas), alpha)
}

/// Empirical CDF `P*(δ ≤ a)`.
pub fn empirical_cdf(sorted: &[f64], a: f64) -> f64 {
    sorted.partition_point(|v| *v <= a) as f64 / sorted.len() as f64
}

/// Left limit `P*(δ < a)`.
pub fn empirical_cdf_left(sorted: &[f64], a: f64) -> f64 {
    sorted.partition_point(|v| *v < a) as f64 / sorted.len() as f64
}

pub(crate) fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Equal-tailed interval `[θ̂ - Q̂_{1-α/2}, θ̂ - Q̂_{α/2}]` at significance `α`.
pub fn reverse_percentile_ci(run: &BootstrapRun, c: &Contrast, alpha: f64) -> Result<Interval> {
    check_level(alpha)?;
    let theta_hat = c.apply(&run.beta_hat)?;
    let deltas = sorted(&run.deltas(c)?);
    interval_from_sorted(theta_hat, 1.0, &deltas, alpha)
}

/// Lower confidence bound `θ̂ - Q̂_{1-α}` at level `1 - α`.
pub fn reverse_percentile_lower_bound(run: &BootstrapRun, c: &Contrast, alpha: f64) -> Result<f64> {
    let theta_hat = c.apply(&run.beta_hat)?;
    Ok(theta_hat - quantile_sorted(&sorted(&run.deltas(c)?), 1.0 - alpha)?)
}

/// Upper confidence bound `θ̂ - Q̂_α` at level `1 - α`.
pub fn reverse_percentile_upper_bound(run: &BootstrapRun, c: &Contrast, alpha: f64) -> Result<f64> {
    let theta_hat = c.apply(&run.beta_hat)?;
    Ok(theta_hat - quantile_sorted(&sorted(&run.deltas(c)?), alpha)?)
}

/// Studentized equal-tailed interval `[θ̂ - σ̂ Q̂_{1-α/2}, θ̂ - σ̂ Q̂_{α/2}]`,
/// with quantiles of `(θ̂* - θ̂)/σ̂*`.
pub fn studentized_ci(run: &BootstrapRun, c: &Contrast, sigma_hat: f64, alpha: f64) -> Result<Interval> {
    check_level(alpha)?;
    if !(sigma_hat > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let theta_hat = c.apply(&run.beta_hat)?;
    let t = sorted(&run.studentized_deltas(c)?);
    interval_from_sorted(theta_hat, sigma_hat, &t, alpha)
}

fn interval_from_sorted(theta_hat: f64, scale: f64, sorted: &[f64], alpha: f64) -> Result<Interval> {
    let hi = quantile_sorted(sorted, 1.0 - alpha / 2.0)?;
    let lo = quantile_sorted(sorted, alpha / 2.0)?;
    Ok(Interval {
        lower: theta_hat - scale * hi,
        upper: theta_hat - scale * lo,
    })
}

/// `β̌ = β̂ - median*(β̂* - β̂)`, coordinate-wise with the `Q̂_{0.5}` median.
pub fn bias_corrected_estimate(fit: &WithinFit, run: &BootstrapRun) -> Result<Vec<f64>> {
    if run.b == 0 {
        return Err(Error::EmptyRun);
    }
    if fit.k() != run.k {
        return Err(Error::DimensionMismatch {
            expected: fit.k(),
            found: run.k,
        });
    }
    (0..run.k)
        .map(|j| {
            let d: Vec<f64> = (0..run.b).map(|r| run.beta_star(r)[j] - run.beta_hat[j]).collect();
            Ok(fit.beta_hat[j] - bootstrap_quantile(&d, 0.5)?)
        })
        .collect()
}

/// Outcome of a two-sided bootstrap test of `H0: θ = θ0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTest {
    pub theta_null: f64,
    /// Null discrepancy `(θ̂ - θ0)`, divided by `σ̂` when studentized.
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub method: CiMethod,
}

/// Two-sided test `p = 2 min(F̂(t), 1 - F̂(t⁻))`, rejecting when `p < α`.
///
/// `method` selects raw deltas (`ReversePercentile`) or studentized ones
/// (`Studentized`, which needs `sigma_hat`). Agrees with inverting the
/// equal-tailed interval of the same method whenever `αB/2` is not an
/// integer.
pub fn test_linear_hypothesis(
    run: &BootstrapRun,
    c: &Contrast,
    theta_null: f64,
    method: CiMethod,
    sigma_hat: Option<f64>,
    alpha: f64,
) -> Result<HypothesisTest> {
    check_level(alpha)?;
    let theta_hat = c.apply(&run.beta_hat)?;
    let (statistic, sample) = match method {
        CiMethod::ReversePercentile => (theta_hat - theta_null, run.deltas(c)?),
        CiMethod::Studentized => {
            let s = sigma_hat.ok_or(Error::ZeroVariance)?;
            if !(s > 0.0) {
                return Err(Error::ZeroVariance);
            }
            ((theta_hat - theta_null) / s, run.studentized_deltas(c)?)
        }
        CiMethod::NormalApprox => {
            return Err(Error::InvalidArgument(
                "bootstrap tests use reverse_percentile or studentized deltas".into(),
            ))
        }
    };
    if sample.is_empty() {
        return Err(Error::EmptyRun);
    }
    let sorted = sorted(&sample);
    let lower = empirical_cdf(&sorted, statistic);
    let upper = 1.0 - empirical_cdf_left(&sorted, statistic);
    let p_value = (2.0 * lower.min(upper)).min(1.0);
    Ok(HypothesisTest {
        theta_null,
        statistic,
        p_value,
        alpha,
        reject: p_value < alpha,
        method,
    })
}

/// `θ̌ ± z_{1-α/2} σ̂ / √(nm)`.
pub fn normal_approx_ci(theta_checked: f64, sigma_hat: f64, nm: usize, alpha: f64) -> Result<Interval> {
    check_level(alpha)?;
    if !(sigma_hat > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let half = normal::quantile(1.0 - alpha / 2.0) * sigma_hat / (nm as f64).sqrt();
    Ok(Interval {
        lower: theta_checked - half,
        upper: theta_checked + half,
    })
}

/// One interval in an [`InferenceReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportInterval {
    pub method: CiMethod,
    /// Significance level; coverage is `1 - alpha`.
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Everything inferred about `θ = c'β` from one bootstrap run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub contrast: Contrast,
    pub beta_hat: Vec<f64>,
    pub beta_checked: Vec<f64>,
    pub theta_hat: f64,
    pub theta_checked: f64,
    /// `sqrt(c' Υ̂ c)`, the scale of `√(nm)(θ̂ - θ)`.
    pub sigma_hat: f64,
    pub alpha_levels: Vec<f64>,
    pub intervals: Vec<ReportInterval>,
    pub tests: Vec<HypothesisTest>,
    pub b: usize,
    pub p: usize,
    pub q: usize,
    pub seed: u64,
    pub redraws: usize,
}

/// Assembles reverse-percentile, studentized (when the run carries `σ̂*`
/// for `c`) and normal-approximation intervals at every level, plus tests of
/// each value in `nulls` at every level.
pub fn build_report(
    fit: &WithinFit,
    run: &BootstrapRun,
    c: &Contrast,
    sigma_hat: f64,
    alpha_levels: &[f64],
    nulls: &[f64],
) -> Result<InferenceReport> {
    let theta_hat = c.apply(&fit.beta_hat)?;
    let beta_checked = bias_corrected_estimate(fit, run)?;
    let theta_checked = c.apply(&beta_checked)?;
    let studentized = run.studentized_for.as_ref() == Some(c) && run.sigma_stars.is_some();
    let nm = fit.n * fit.m;
    let mut intervals = Vec::new();
    let mut tests = Vec::new();
    for &alpha in alpha_levels {
        let rp = reverse_percentile_ci(run, c, alpha)?;
        intervals.push(ReportInterval {
            method: CiMethod::ReversePercentile,
            alpha,
            lower: rp.lower,
            upper: rp.upper,
        });
        if studentized && sigma_hat > 0.0 {
            let st = studentized_ci(run, c, sigma_hat, alpha)?;
            intervals.push(ReportInterval {
                method: CiMethod::Studentized,
                alpha,
                lower: st.lower,
                upper: st.upper,
            });
        }
        if sigma_hat > 0.0 {
            let na = normal_approx_ci(theta_checked, sigma_hat, nm, alpha)?;
            intervals.push(ReportInterval {
                method: CiMethod::NormalApprox,
                alpha,
                lower: na.lower,
                upper: na.upper,
            });
        }
        for &null in nulls {
            tests.push(test_linear_hypothesis(
                run,
                c,
                null,
                CiMethod::ReversePercentile,
                None,
                alpha,
            )?);
            if studentized && sigma_hat > 0.0 {
                tests.push(test_linear_hypothesis(
                    run,
                    c,
                    null,
                    CiMethod::Studentized,
                    Some(sigma_hat),
                    alpha,
                )?);
            }
        }
    }
    Ok(InferenceReport {
        contrast: c.clone(),
        beta_hat: fit.beta_hat.clone(),
        beta_checked,
        theta_hat,
        theta_checked,
        sigma_hat,
        alpha_levels: alpha_levels.to_vec(),
        intervals,
        tests,
        b: run.b,
        p: run.p,
        q: run.q,
        seed: run.seed,
        redraws: run.redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_from(deltas: &[f64], sigmas: Option<Vec<f64>>) -> BootstrapRun {
        BootstrapRun {
            b: deltas.len(),
            k: 1,
            beta_stars: deltas.iter().map(|d| 1.0 + d).collect(),
            studentized_for: sigmas.as_ref().map(|_| Contrast::unit(1, 0)),
            sigma_stars: sigmas,
            beta_hat: vec![1.0],
            seed: 0,
            p: 1,
            q: 1,
            redraws: 0,
        }
    }

    #[test]
    fn quantile_examples() {
        let d = [4.0, 2.0, 1.0, 3.0];
        assert_eq!(bootstrap_quantile(&d, 0.5).unwrap(), 2.0);
        assert_eq!(bootstrap_quantile(&d, 0.76).unwrap(), 4.0);
        assert_eq!(bootstrap_quantile(&d, 0.25).unwrap(), 1.0);
        assert_eq!(bootstrap_quantile(&d, 0.2500001).unwrap(), 2.0);
        for a in [0.01, 0.3, 0.99] {
            assert_eq!(bootstrap_quantile(&[7.5; 9], a).unwrap(), 7.5);
        }
        assert_eq!(bootstrap_quantile(&[], 0.5).unwrap_err(), Error::EmptyRun);
        assert_eq!(bootstrap_quantile(&d, 1.0).unwrap_err().kind(), "InvalidLevel");
    }

    #[test]
    fn degenerate_run_gives_point_interval() {
        let run = run_from(&[0.0; 50], None);
        let c = Contrast::unit(1, 0);
        let ci = reverse_percentile_ci(&run, &c, 0.1).unwrap();
        assert_eq!((ci.lower, ci.upper), (1.0, 1.0));
    }

    #[test]
    fn symmetric_deltas_give_symmetric_interval() {
        let deltas: Vec<f64> = (-50..=50).map(|v| v as f64 / 10.0).collect();
        let run = run_from(&deltas, None);
        let c = Contrast::unit(1, 0);
        let ci = reverse_percentile_ci(&run, &c, 0.1).unwrap();
        assert!(((ci.upper - 1.0) - (1.0 - ci.lower)).abs() <= 0.1 + 1e-12);
        let checked = bias_corrected_estimate(
            &WithinFit {
                beta_hat: vec![1.0],
                residuals: vec![],
                means: crate::panel::UnitMeans { y: vec![], x: vec![] },
                sigma_hat: nalgebra::DMatrix::identity(1, 1),
                n: 1,
                m: 1,
            },
            &run,
        )
        .unwrap();
        assert_eq!(checked, vec![1.0]);
    }

    #[test]
    fn studentized_with_constant_sigma_rescales_percentile() {
        let deltas: Vec<f64> = (-20..=20).map(|v| v as f64).collect();
        let run = run_from(&deltas, Some(vec![2.0; deltas.len()]));
        let c = Contrast::unit(1, 0);
        let rp = reverse_percentile_ci(&run, &c, 0.1).unwrap();
        let st = studentized_ci(&run, &c, 3.0, 0.1).unwrap();
        assert!(((st.lower - 1.0) - 1.5 * (rp.lower - 1.0)).abs() < 1e-12);
        assert!(((st.upper - 1.0) - 1.5 * (rp.upper - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn studentized_errors() {
        let c = Contrast::unit(1, 0);
        let run = run_from(&[0.1, -0.1], None);
        assert_eq!(
            studentized_ci(&run, &c, 1.0, 0.1).unwrap_err(),
            Error::MissingStudentization
        );
        let run = run_from(&[0.1, -0.1], Some(vec![0.0, 0.0]));
        assert_eq!(studentized_ci(&run, &c, 1.0, 0.1).unwrap_err(), Error::ZeroVariance);
        let run = run_from(&[0.1, -0.1], Some(vec![1.0, 1.0]));
        assert_eq!(studentized_ci(&run, &c, 0.0, 0.1).unwrap_err(), Error::ZeroVariance);
    }

    #[test]
    fn test_p_values() {
        let deltas: Vec<f64> = (-50..=50).map(|v| v as f64 / 10.0).collect();
        let run = run_from(&deltas, None);
        let c = Contrast::unit(1, 0);
        let t = test_linear_hypothesis(&run, &c, 1.0, CiMethod::ReversePercentile, None, 0.05).unwrap();
        assert!(t.p_value > 0.98, "{}", t.p_value);
        assert!(!t.reject);
        let t = test_linear_hypothesis(&run, &c, -100.0, CiMethod::ReversePercentile, None, 0.05).unwrap();
        assert!(t.p_value <= 2.0 / deltas.len() as f64);
        assert!(t.reject);
    }

    #[test]
    fn normal_approx() {
        let ci = normal_approx_ci(0.5, 2.0, 100, 0.1).unwrap();
        let z = normal::quantile(0.95);
        assert!((ci.upper - (0.5 + z * 0.2)).abs() < 1e-15);
        let narrow = normal_approx_ci(0.5, 2.0, 100, 0.999_999).unwrap();
        assert!(narrow.width() < 1e-5);
        assert_eq!(normal_approx_ci(0.5, 0.0, 100, 0.1).unwrap_err(), Error::ZeroVariance);
    }
}
