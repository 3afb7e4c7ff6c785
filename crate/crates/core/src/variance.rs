//! Long-run variance machinery.
//!
//! Three estimators of the score variance Ω are provided:
//!
//! * [`omega_star_resampled`]: the per-replicate block estimator, built from
//!   the original data at the drawn block positions, demeaned by the
//!   bootstrap-sample means and evaluated at the bootstrap slope.
//! * [`omega_star_closed_form`]: the bootstrap variance of the resampled score
//!   computed without resampling, by averaging block-score outer products over
//!   every admissible block start. Bootstrap means are replaced by full-sample
//!   means, which makes the score separable across blocks; the error of that
//!   replacement is of order `q/m`.
//! * [`omega_plug_in_hac`]: the sample analogue of Ω with Bartlett weights.
//!
//! The sandwich `Υ = Σ⁻¹ Ω Σ⁻¹` is the asymptotic variance of
//! `√(nm)(β̂ - β)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RCOND, PSD_TOLERANCE};
use crate::mbb::{BlockGeometry, BlockPlan};
use crate::panel::{self, Contrast, PanelData, UnitMeans, WithinFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMethod {
    ResampledStar,
    ClosedFormStar,
    PlugInHac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimates {
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub upsilon: DMatrix<f64>,
    pub method: OmegaMethod,
}

impl VarianceEstimates {
    /// Σ̂ together with either the closed-form bootstrap Ω̂ (`q` is the block
    /// length) or the HAC Ω̂ (`q` is the bandwidth).
    pub fn from_fit(panel: &PanelData, fit: &WithinFit, method: OmegaMethod, q: usize) -> Result<Self> {
        let omega = match method {
            OmegaMethod::ClosedFormStar => omega_star_closed_form(panel, fit, q)?,
            OmegaMethod::PlugInHac => omega_plug_in_hac(panel, fit, q)?,
            OmegaMethod::ResampledStar => {
                return Err(Error::InvalidArgument(
                    "the resampled estimator needs a bootstrap replicate; use VarianceEstimates::resampled".into(),
                ))
            }
        };
        let sigma = fit.sigma_hat.clone();
        let upsilon = upsilon(&sigma, &omega)?;
        Ok(VarianceEstimates {
            sigma,
            omega,
            upsilon,
            method,
        })
    }

    /// Σ̂*, Ω̂* and Υ̂* for one bootstrap replicate. `fit_star` is the fit on
    /// the resampled panel drawn with `plan`.
    pub fn resampled(panel: &PanelData, plan: &BlockPlan, fit_star: &WithinFit) -> Result<Self> {
        let omega = omega_star_resampled(panel, plan, &fit_star.beta_hat, &fit_star.means)?;
        let sigma = fit_star.sigma_hat.clone();
        let upsilon = upsilon(&sigma, &omega)?;
        Ok(VarianceEstimates {
            sigma,
            omega,
            upsilon,
            method: OmegaMethod::ResampledStar,
        })
    }
}

/// Σ̂ = (1/nm) ΣΣ (x - x̄)(x - x̄)'.
pub fn sigma_hat(panel: &PanelData) -> DMatrix<f64> {
    let k = panel.k();
    let wt = panel::within_transform(panel);
    let mut s = DMatrix::<f64>::zeros(k, k);
    for row in wt.x.chunks_exact(k) {
        for a in 0..k {
            for b in 0..=a {
                s[(a, b)] += row[a] * row[b];
            }
        }
    }
    panel::fill_upper(&mut s);
    s / panel.nm() as f64
}

/// Block-score estimator for one replicate:
/// `(1/np) Σ_i Σ_blocks V V'` with
/// `V = q^{-1/2} Σ_{block} (x_it - x̄*_i) ((y_it - ȳ*_i) - (x_it - x̄*_i)'β*)`,
/// where `(y_it, x_it)` are the ORIGINAL observations at the drawn block
/// positions and `x̄*`, `ȳ*` the bootstrap-sample unit means.
pub fn omega_star_resampled(
    panel: &PanelData,
    plan: &BlockPlan,
    beta_star: &[f64],
    means_star: &UnitMeans,
) -> Result<DMatrix<f64>> {
    let (n, k) = (panel.n(), panel.k());
    if beta_star.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: beta_star.len(),
        });
    }
    if means_star.y.len() != n || means_star.x.len() != n * k {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: means_star.y.len(),
        });
    }
    if plan.m() != panel.m() {
        return Err(Error::InvalidBlockPlan(format!(
            "plan built for m = {}, panel has m = {}",
            plan.m(),
            panel.m()
        )));
    }
    let q = plan.q();
    let inv_sqrt_q = 1.0 / (q as f64).sqrt();
    let mut acc = DMatrix::<f64>::zeros(k, k);
    let mut v = vec![0.0; k];
    let mut z = vec![0.0; k];
    for i in 0..n {
        let xbar = means_star.x_of(i, k);
        let ybar = means_star.y[i];
        for &start in plan.starts() {
            v.iter_mut().for_each(|e| *e = 0.0);
            for t in start..start + q {
                for ((zj, xj), mj) in z.iter_mut().zip(panel.x_at(i, t)).zip(xbar) {
                    *zj = xj - mj;
                }
                let e = (panel.y_at(i, t) - ybar) - panel::dot(&z, beta_star);
                for (vj, zj) in v.iter_mut().zip(&z) {
                    *vj += zj * e;
                }
            }
            add_outer(&mut acc, &v, inv_sqrt_q * inv_sqrt_q);
        }
    }
    panel::fill_upper(&mut acc);
    linalg::psd_repair(&(acc / (n * plan.p()) as f64))
}

/// Bootstrap variance of the resampled score computed without resampling.
///
/// For each unit, block scores `U_t = q^{-1/2} Σ_{s=t}^{t+q-1} (x_is - x̄_i) ε̂_is`
/// are formed at every start `t ∈ {0, …, m-q}`; their variance over `t`
/// (mean outer product minus outer product of the mean) is averaged over
/// units. Uses full-sample means and residuals in place of their bootstrap
/// counterparts.
pub fn omega_star_closed_form(panel: &PanelData, fit: &WithinFit, q: usize) -> Result<DMatrix<f64>> {
    let geometry = BlockGeometry::new(panel.m(), q)?;
    check_fit(panel, fit)?;
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    let positions = geometry.positions();
    let inv_sqrt_q = 1.0 / (q as f64).sqrt();
    let scores = unit_scores(panel, fit);

    let mut acc = DMatrix::<f64>::zeros(k, k);
    let mut u = vec![0.0; k];
    let mut mean = vec![0.0; k];
    for i in 0..n {
        let g = &scores[i * m * k..(i + 1) * m * k];
        let mut second = DMatrix::<f64>::zeros(k, k);
        mean.iter_mut().for_each(|e| *e = 0.0);
        for t in 0..positions {
            u.iter_mut().for_each(|e| *e = 0.0);
            for row in g[t * k..(t + q) * k].chunks_exact(k) {
                for (uj, gj) in u.iter_mut().zip(row) {
                    *uj += gj;
                }
            }
            u.iter_mut().for_each(|e| *e *= inv_sqrt_q);
            for (mj, uj) in mean.iter_mut().zip(&u) {
                *mj += uj;
            }
            add_outer(&mut second, &u, 1.0);
        }
        let inv_p = 1.0 / positions as f64;
        mean.iter_mut().for_each(|e| *e *= inv_p);
        for a in 0..k {
            for b in 0..=a {
                acc[(a, b)] += second[(a, b)] * inv_p - mean[a] * mean[b];
            }
        }
    }
    panel::fill_upper(&mut acc);
    linalg::psd_repair(&(acc / n as f64))
}

/// HAC sample analogue of Ω: lag-0 outer products of the scores
/// `g_it = (x_it - x̄_i) ε̂_it` plus symmetrized lag-τ cross products for
/// `τ = 1..=bandwidth`, weighted by `1 - τ/(bandwidth + 1)`, all scaled by
/// `1/nm`.
pub fn omega_plug_in_hac(panel: &PanelData, fit: &WithinFit, bandwidth: usize) -> Result<DMatrix<f64>> {
    check_fit(panel, fit)?;
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    if bandwidth >= m {
        return Err(Error::InvalidArgument(format!(
            "HAC bandwidth {bandwidth} must be below m = {m}"
        )));
    }
    let scores = unit_scores(panel, fit);
    let mut acc = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let g = &scores[i * m * k..(i + 1) * m * k];
        for row in g.chunks_exact(k) {
            add_outer(&mut acc, row, 1.0);
        }
        for lag in 1..=bandwidth {
            let w = 1.0 - lag as f64 / (bandwidth + 1) as f64;
            for t in 0..m - lag {
                let a = &g[t * k..(t + 1) * k];
                let b = &g[(t + lag) * k..(t + lag + 1) * k];
                for r in 0..k {
                    for c in 0..=r {
                        acc[(r, c)] += w * (a[r] * b[c] + b[r] * a[c]);
                    }
                }
            }
        }
    }
    panel::fill_upper(&mut acc);
    linalg::psd_repair(&(acc / (n * m) as f64))
}

/// Sandwich `Σ⁻¹ Ω Σ⁻¹`.
pub fn upsilon(sigma: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.shape() != omega.shape() || !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            found: omega.nrows(),
        });
    }
    let inv = linalg::spd_inverse(sigma, DEFAULT_RCOND)?;
    Ok(linalg::symmetrize(&(&inv * omega * &inv)))
}

/// `c' Υ c`, clamped at zero when it is negative only by rounding.
pub fn contrast_variance(upsilon: &DMatrix<f64>, c: &Contrast) -> Result<f64> {
    let k = upsilon.nrows();
    if c.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: c.len(),
        });
    }
    let cv = DVector::from_column_slice(c.as_slice());
    let v = (cv.transpose() * upsilon * &cv)[(0, 0)];
    let scale = upsilon.amax().max(1.0);
    if v < -PSD_TOLERANCE * scale || v.is_nan() {
        return Err(Error::NegativeVariance { value: v });
    }
    Ok(v.max(0.0))
}

/// Per-observation scores `(x_it - x̄_i) ε̂_it`, `n * m * k`, unit-major.
fn unit_scores(panel: &PanelData, fit: &WithinFit) -> Vec<f64> {
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    let mut g = Vec::with_capacity(n * m * k);
    for i in 0..n {
        let xbar = fit.means.x_of(i, k);
        for t in 0..m {
            let e = fit.residuals[i * m + t];
            g.extend(panel.x_at(i, t).iter().zip(xbar).map(|(x, mu)| (x - mu) * e));
        }
    }
    g
}

fn check_fit(panel: &PanelData, fit: &WithinFit) -> Result<()> {
    if fit.n != panel.n() || fit.m != panel.m() || fit.k() != panel.k() {
        return Err(Error::DimensionMismatch {
            expected: panel.nm(),
            found: fit.n * fit.m,
        });
    }
    Ok(())
}

/// Adds `scale * v v'` to the lower triangle of `acc`.
fn add_outer(acc: &mut DMatrix<f64>, v: &[f64], scale: f64) {
    for a in 0..v.len() {
        for b in 0..=a {
            acc[(a, b)] += scale * v[a] * v[b];
        }
    }
}
