//! Simulation designs: the stationary panel AR(1), a small menu of linear
//! designs for fixtures, and the analytic bias and limit-law oracles.

use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::standard_normal;
use crate::panel::PanelData;
use crate::rng::{self, DOMAIN_DATA};

/// Stationary AR(1) panel: `y_it = β x_it + ε_it`, `x_it = y_i,t-1`,
/// `ε ~ N(0, 1)`, `x_i1 ~ N(0, 1/(1-β²))`, no fixed effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Design {
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl Ar1Design {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.abs() < 1.0) {
            return Err(Error::NonStationary { beta: self.beta });
        }
        if self.n == 0 {
            return Err(Error::EmptyPanel);
        }
        if self.m < 2 {
            return Err(Error::TooFewPeriods { m: self.m });
        }
        Ok(())
    }
}

pub fn simulate_ar1(design: &Ar1Design) -> Result<PanelData> {
    let mut stream = rng::substream(design.seed, &[DOMAIN_DATA]);
    simulate_ar1_with(design.beta, design.n, design.m, &mut stream)
}

/// Same design, drawing from a caller-supplied stream.
pub fn simulate_ar1_with<R: RngCore + ?Sized>(beta: f64, n: usize, m: usize, rng: &mut R) -> Result<PanelData> {
    Ar1Design { beta, n, m, seed: 0 }.validate()?;
    let init_sd = (1.0 / (1.0 - beta * beta)).sqrt();
    let mut y = Vec::with_capacity(n * m);
    let mut x = Vec::with_capacity(n * m);
    for _ in 0..n {
        let mut prev = init_sd * standard_normal(rng);
        for _ in 0..m {
            let yt = beta * prev + standard_normal(rng);
            x.push(prev);
            y.push(yt);
            prev = yt;
        }
    }
    Ok(PanelData::from_parts_unchecked(n, m, 1, y, x))
}

/// Fixture designs for `y_it = α_i + x_it'β + ε_it`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSpec {
    /// Regressors i.i.d. N(0,1) shifted by `α_i/2`; errors i.i.d. N(0,1).
    /// Strictly exogenous.
    Iid,
    /// The first regressor follows `w_t = ρ w_{t-1} + γ ε_{t-1} + u_t`
    /// (plus `α_i`), so past errors feed into future regressors; the rest
    /// are as in `Iid`.
    Feedback { rho: f64, gamma: f64 },
    /// As `Iid` with `ε ≡ 0`.
    ZeroNoise,
}

impl FromStr for LinearSpec {
    type Err = Error;

    /// `iid`, `zero-noise`, `feedback` or `feedback:RHO,GAMMA`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "iid" => Ok(LinearSpec::Iid),
            "zero-noise" | "zero_noise" => Ok(LinearSpec::ZeroNoise),
            "feedback" => Ok(LinearSpec::Feedback { rho: 0.5, gamma: 0.5 }),
            other => {
                let params = other
                    .strip_prefix("feedback:")
                    .ok_or_else(|| Error::UnknownSpec(s.clone()))?;
                let vals: Vec<f64> = params
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::UnknownSpec(s.clone()))?;
                match vals[..] {
                    [rho, gamma] if rho.abs() < 1.0 => Ok(LinearSpec::Feedback { rho, gamma }),
                    _ => Err(Error::UnknownSpec(s.clone())),
                }
            }
        }
    }
}

/// A simulated fixture together with its true intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSample {
    pub panel: PanelData,
    pub alpha: Vec<f64>,
}

pub fn simulate_linear(n: usize, m: usize, beta: &[f64], spec: LinearSpec, seed: u64) -> Result<PanelData> {
    simulate_linear_with_effects(n, m, beta, spec, seed).map(|s| s.panel)
}

/// Draws a panel from `spec` with `k = beta.len()` regressors and
/// `α_i ~ N(0, 1)`.
pub fn simulate_linear_with_effects(
    n: usize,
    m: usize,
    beta: &[f64],
    spec: LinearSpec,
    seed: u64,
) -> Result<LinearSample> {
    let k = beta.len();
    if n == 0 || k == 0 {
        return Err(Error::EmptyPanel);
    }
    if m < 2 {
        return Err(Error::TooFewPeriods { m });
    }
    if let LinearSpec::Feedback { rho, .. } = spec {
        if !(rho.abs() < 1.0) {
            return Err(Error::NonStationary { beta: rho });
        }
    }
    const BURN_IN: usize = 50;
    let mut rng = rng::substream(seed, &[DOMAIN_DATA]);
    let noise = !matches!(spec, LinearSpec::ZeroNoise);
    let mut alpha = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n * m);
    let mut x = Vec::with_capacity(n * m * k);
    for _ in 0..n {
        let a = standard_normal(&mut rng);
        alpha.push(a);
        let mut w = 0.0;
        let mut eps_prev = 0.0;
        if let LinearSpec::Feedback { rho, gamma } = spec {
            for _ in 0..BURN_IN {
                let e = standard_normal(&mut rng);
                w = rho * w + gamma * eps_prev + standard_normal(&mut rng);
                eps_prev = e;
            }
        }
        for _ in 0..m {
            let eps = if noise { standard_normal(&mut rng) } else { 0.0 };
            let mut fitted = a;
            for (j, bj) in beta.iter().enumerate() {
                let xj = match spec {
                    LinearSpec::Feedback { rho, gamma } if j == 0 => {
                        w = rho * w + gamma * eps_prev + standard_normal(&mut rng);
                        a + w
                    }
                    _ => 0.5 * a + standard_normal(&mut rng),
                };
                fitted += xj * bj;
                x.push(xj);
            }
            y.push(fitted + eps);
            eps_prev = eps;
        }
    }
    let panel = PanelData::new(n, m, k, y, x)?;
    Ok(LinearSample { panel, alpha })
}

/// Normal approximation to `√(nm)(β̂ - β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub mean: f64,
    pub sd: f64,
}

impl LimitLaw {
    /// The `α`-quantile `mean + sd z_α`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        self.mean + self.sd * crate::normal::quantile(alpha)
    }
}

/// Limit law of `√(nm)(β̂ - β)` in the AR(1) design:
/// mean `-√(n/m)(1+β)`, standard deviation `√(1/(1-β²))`.
pub fn ar1_limit_law(beta: f64, n: usize, m: usize) -> Result<LimitLaw> {
    if !(beta.abs() < 1.0) {
        return Err(Error::NonStationary { beta });
    }
    Ok(LimitLaw {
        mean: -((n as f64) / (m as f64)).sqrt() * (1.0 + beta),
        sd: (1.0 / (1.0 - beta * beta)).sqrt(),
    })
}

/// Cross-moment structures with closed-form `E(z_t ε_{t+τ})` and
/// `E(z_{t+τ} ε_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSpec {
    /// All leads and lags uncorrelated with the errors.
    StrictlyExogenous { k: usize },
    /// `x_t = y_{t-1}`: `E(z_{t+τ} ε_t) = β^{τ-1} σ²`, `E(z_t ε_{t+τ}) = 0`.
    Ar1 { beta: f64, sigma2: f64 },
    /// [`LinearSpec::Feedback`] with unit error variance scaled by `sigma2`:
    /// `E(z_{t+τ} ε_t) = γ ρ^{τ-1} σ²` for the first of `k` regressors.
    Feedback {
        rho: f64,
        gamma: f64,
        sigma2: f64,
        k: usize,
    },
}

impl MomentSpec {
    /// `(E(z_t ε_{t+τ}), E(z_{t+τ} ε_t))` for regressor `j`.
    fn cross_moments(&self, j: usize, tau: usize) -> (f64, f64) {
        let tau = tau as i32;
        match *self {
            MomentSpec::StrictlyExogenous { .. } => (0.0, 0.0),
            MomentSpec::Ar1 { beta, sigma2 } => (0.0, beta.powi(tau - 1) * sigma2),
            MomentSpec::Feedback { rho, gamma, sigma2, .. } if j == 0 => (0.0, gamma * rho.powi(tau - 1) * sigma2),
            MomentSpec::Feedback { .. } => (0.0, 0.0),
        }
    }

    fn k(&self) -> usize {
        match *self {
            MomentSpec::StrictlyExogenous { k } | MomentSpec::Feedback { k, .. } => k,
            MomentSpec::Ar1 { .. } => 1,
        }
    }
}

/// Finite-sample bias vector
/// `b = -Σ_{τ=1}^{m-1} ((m-τ)/m) (E(z_t ε_{t+τ}) + E(z_{t+τ} ε_t))`
/// (moments are identical across units, so the unit average drops out).
pub fn theoretical_bias_b(spec: &MomentSpec, m: usize) -> Result<Vec<f64>> {
    match *spec {
        MomentSpec::Ar1 { beta, .. } if !(beta.abs() < 1.0) => return Err(Error::NonStationary { beta }),
        MomentSpec::Feedback { rho, .. } if !(rho.abs() < 1.0) => return Err(Error::NonStationary { beta: rho }),
        _ => {}
    }
    let mf = m as f64;
    Ok((0..spec.k())
        .map(|j| {
            -(1..m)
                .map(|tau| {
                    let (lead, lag) = spec.cross_moments(j, tau);
                    (mf - tau as f64) / mf * (lead + lag)
                })
                .sum::<f64>()
        })
        .collect())
}

/// Σ of the AR(1) design: the stationary variance `σ²/(1-β²)`.
pub fn ar1_sigma(beta: f64, sigma2: f64) -> f64 {
    sigma2 / (1.0 - beta * beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_law_values() {
        let l = ar1_limit_law(0.0, 200, 200).unwrap();
        assert_eq!((l.mean, l.sd), (-1.0, 1.0));
        let l = ar1_limit_law(0.0, 100, 400).unwrap();
        assert_eq!((l.mean, l.sd), (-0.5, 1.0));
        let l = ar1_limit_law(0.0, 10, 10_000_000_000).unwrap();
        assert!(l.mean.abs() < 1e-3);
        assert_eq!(ar1_limit_law(1.0, 10, 10).unwrap_err().kind(), "NonStationary");
    }

    #[test]
    fn bias_vector_examples() {
        assert_eq!(
            theoretical_bias_b(&MomentSpec::StrictlyExogenous { k: 2 }, 50).unwrap(),
            vec![0.0, 0.0]
        );
        let m = 200;
        let b = theoretical_bias_b(&MomentSpec::Ar1 { beta: 0.0, sigma2: 1.0 }, m).unwrap();
        assert!((b[0] + (m as f64 - 1.0) / m as f64).abs() < 1e-15);
        // β = 0.5: geometric series limit -1/(1-β) = -2
        let b = theoretical_bias_b(&MomentSpec::Ar1 { beta: 0.5, sigma2: 1.0 }, 500).unwrap();
        assert!((b[0] + 2.0).abs() / 2.0 < 0.01, "{}", b[0]);
        let fb = theoretical_bias_b(
            &MomentSpec::Feedback {
                rho: 0.5,
                gamma: 0.5,
                sigma2: 1.0,
                k: 2,
            },
            100,
        )
        .unwrap();
        assert!(fb[0] < 0.0);
        assert_eq!(fb[1], 0.0);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("iid".parse::<LinearSpec>().unwrap(), LinearSpec::Iid);
        assert_eq!("zero-noise".parse::<LinearSpec>().unwrap(), LinearSpec::ZeroNoise);
        assert_eq!(
            "feedback:0.3,0.8".parse::<LinearSpec>().unwrap(),
            LinearSpec::Feedback { rho: 0.3, gamma: 0.8 }
        );
        assert_eq!("garch".parse::<LinearSpec>().unwrap_err().kind(), "UnknownSpec");
        assert_eq!("feedback:2,1".parse::<LinearSpec>().unwrap_err().kind(), "UnknownSpec");
    }

    #[test]
    fn ar1_is_reproducible() {
        let d = Ar1Design {
            beta: 0.3,
            n: 5,
            m: 8,
            seed: 11,
        };
        assert_eq!(simulate_ar1(&d).unwrap(), simulate_ar1(&d).unwrap());
        let mut other = d;
        other.seed = 12;
        assert_ne!(simulate_ar1(&d).unwrap(), simulate_ar1(&other).unwrap());
        let bad = Ar1Design { beta: -1.0, ..d };
        assert_eq!(simulate_ar1(&bad).unwrap_err().kind(), "NonStationary");
    }

    #[test]
    fn ar1_lag_structure() {
        let p = simulate_ar1(&Ar1Design {
            beta: 0.5,
            n: 3,
            m: 6,
            seed: 1,
        })
        .unwrap();
        for i in 0..3 {
            for t in 1..6 {
                assert_eq!(p.x_at(i, t)[0], p.y_at(i, t - 1));
            }
        }
    }
}
