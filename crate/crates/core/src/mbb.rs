//! Panel moving block bootstrap.
//!
//! The time axis is cut into `p` blocks of `q` consecutive periods
//! (`m = p q`). Each bootstrap sample draws `p` block starts uniformly from
//! `{0, …, m-q}` with replacement and concatenates the blocks; the same
//! starts apply to every unit, so cross-sections move together and each
//! `(y, x)` pair stays intact.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::{self, DEFAULT_RCOND};
use crate::panel::{self, Contrast, PanelData, WithinFit};
use crate::rng::{self, DOMAIN_BOOTSTRAP};
use crate::variance;

/// All block lengths `q` with `m % q == 0`, ascending.
pub fn valid_block_lengths(m: usize) -> Vec<usize> {
    (1..=m).filter(|q| m.is_multiple_of(*q)).collect()
}

/// Block geometry `(m, q, p)` with `m = p q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGeometry {
    m: usize,
    q: usize,
    p: usize,
}

impl BlockGeometry {
    pub fn new(m: usize, q: usize) -> Result<Self> {
        if q == 0 || q > m || !m.is_multiple_of(q) {
            return Err(Error::IndivisibleBlockLength {
                m,
                q,
                divisors: valid_block_lengths(m),
            });
        }
        Ok(BlockGeometry { m, q, p: m / q })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of admissible block starts, `m - q + 1`.
    pub fn positions(&self) -> usize {
        self.m - self.q + 1
    }
}

/// Drawn block starts for one bootstrap sample (0-based periods).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    geometry: BlockGeometry,
    starts: Vec<usize>,
}

impl BlockPlan {
    pub fn new(m: usize, q: usize, starts: Vec<usize>) -> Result<Self> {
        let geometry = BlockGeometry::new(m, q)?;
        if starts.len() != geometry.p {
            return Err(Error::InvalidBlockPlan(format!(
                "{} starts for {} blocks",
                starts.len(),
                geometry.p
            )));
        }
        if let Some(s) = starts.iter().find(|&&s| s > m - q) {
            return Err(Error::InvalidBlockPlan(format!("start {s} outside 0..={}", m - q)));
        }
        Ok(BlockPlan { geometry, starts })
    }

    pub fn geometry(&self) -> BlockGeometry {
        self.geometry
    }

    pub fn m(&self) -> usize {
        self.geometry.m
    }

    pub fn q(&self) -> usize {
        self.geometry.q
    }

    pub fn p(&self) -> usize {
        self.geometry.p
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Original period copied into bootstrap period `t`.
    pub fn source_period(&self, t: usize) -> usize {
        let q = self.geometry.q;
        self.starts[t / q] + t % q
    }

    /// True when the plan reproduces the original time order.
    pub fn is_identity(&self) -> bool {
        let q = self.geometry.q;
        self.starts.iter().enumerate().all(|(j, &s)| s == j * q)
    }
}

/// Draws `p = m/q` starts i.i.d. uniform on `{0, …, m-q}`.
pub fn draw_block_plan<R: Rng + ?Sized>(m: usize, q: usize, rng: &mut R) -> Result<BlockPlan> {
    let geometry = BlockGeometry::new(m, q)?;
    let last = (m - q) as u64;
    let starts = (0..geometry.p).map(|_| rng.random_range(0..=last) as usize).collect();
    Ok(BlockPlan { geometry, starts })
}

/// Builds the bootstrap panel: bootstrap period `(j q + r)` of every unit is
/// original period `starts[j] + r`.
///
/// # Panics
/// If the plan was built for a different `m`.
pub fn resample_panel(panel: &PanelData, plan: &BlockPlan) -> PanelData {
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    assert_eq!(plan.m(), m, "block plan built for a different number of periods");
    let q = plan.q();
    let mut y = Vec::with_capacity(n * m);
    let mut x = Vec::with_capacity(n * m * k);
    for i in 0..n {
        let uy = panel.unit_y(i);
        let ux = panel.unit_x(i);
        for &s in plan.starts() {
            y.extend_from_slice(&uy[s..s + q]);
            x.extend_from_slice(&ux[s * k..(s + q) * k]);
        }
    }
    PanelData::from_parts_unchecked(n, m, k, y, x)
}

/// How each replicate's slope is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Materialize the resampled panel and refit it.
    Resample,
    /// Assemble the cross products from precomputed per-block sums. Same
    /// estimator, `O(n p k²)` per replicate instead of `O(n m k²)`.
    #[default]
    BlockSums,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOptions {
    /// When set, each replicate also records `σ̂* = sqrt(c' Υ̂* c)`.
    pub studentize: Option<Contrast>,
    pub engine: Engine,
    pub execution: Execution,
    /// Abort once singular redraws exceed this fraction of `B`.
    pub max_singular_fraction: f64,
    /// Redraw cap for a single replicate.
    pub max_attempts: usize,
    pub rcond_tolerance: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            studentize: None,
            engine: Engine::default(),
            execution: Execution::default(),
            max_singular_fraction: 0.1,
            max_attempts: 64,
            rcond_tolerance: DEFAULT_RCOND,
        }
    }
}

/// `B` bootstrap draws of `β̂*`, plus `σ̂*` for studentized runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRun {
    pub b: usize,
    pub k: usize,
    /// `B * k`, replicate-major.
    pub beta_stars: Vec<f64>,
    pub sigma_stars: Option<Vec<f64>>,
    /// Contrast the `sigma_stars` belong to.
    pub studentized_for: Option<Contrast>,
    /// Full-sample estimate the replicates are centered on.
    pub beta_hat: Vec<f64>,
    pub seed: u64,
    pub p: usize,
    pub q: usize,
    /// Replicates redrawn after hitting a singular design.
    pub redraws: usize,
}

impl BootstrapRun {
    pub fn beta_star(&self, r: usize) -> &[f64] {
        &self.beta_stars[r * self.k..(r + 1) * self.k]
    }

    /// `θ̂*_r - θ̂` for every replicate.
    pub fn deltas(&self, c: &Contrast) -> Result<Vec<f64>> {
        let theta_hat = c.apply(&self.beta_hat)?;
        self.beta_stars
            .chunks_exact(self.k)
            .map(|b| c.apply(b).map(|t| t - theta_hat))
            .collect()
    }

    /// `(θ̂*_r - θ̂) / σ̂*_r` for every replicate.
    pub fn studentized_deltas(&self, c: &Contrast) -> Result<Vec<f64>> {
        let sigmas = match (&self.sigma_stars, &self.studentized_for) {
            (Some(s), Some(sc)) if sc == c => s,
            _ => return Err(Error::MissingStudentization),
        };
        if sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::ZeroVariance);
        }
        Ok(self.deltas(c)?.into_iter().zip(sigmas).map(|(d, s)| d / s).collect())
    }
}

/// Runs the bootstrap after fitting the original panel.
pub fn bootstrap_distribution(
    panel: &PanelData,
    q: usize,
    b: usize,
    seed: u64,
    options: &BootstrapOptions,
) -> Result<BootstrapRun> {
    BlockGeometry::new(panel.m(), q)?;
    let fit = panel::within_group_estimate_with(panel, options.rcond_tolerance)?;
    bootstrap_distribution_with_fit(panel, &fit, q, b, seed, options)
}

/// Runs the bootstrap for a panel whose within-group fit is already known.
///
/// Replicate `r` draws its plan from the stream `(seed, [r, attempt])`;
/// a singular replicate is redrawn with the next attempt counter. Results
/// depend only on `(panel, q, b, seed, options)`, never on scheduling.
pub fn bootstrap_distribution_with_fit(
    panel: &PanelData,
    fit: &WithinFit,
    q: usize,
    b: usize,
    seed: u64,
    options: &BootstrapOptions,
) -> Result<BootstrapRun> {
    let geometry = BlockGeometry::new(panel.m(), q)?;
    if b == 0 {
        return Err(Error::EmptyRun);
    }
    if let Some(c) = &options.studentize {
        if c.len() != panel.k() {
            return Err(Error::DimensionMismatch {
                expected: panel.k(),
                found: c.len(),
            });
        }
    }
    let evaluator = match options.engine {
        Engine::Resample => Evaluator::Resample,
        Engine::BlockSums => Evaluator::BlockSums(Box::new(BlockStats::new(panel, geometry))),
    };
    let ctx = Context {
        panel,
        fit,
        geometry,
        options,
        evaluator,
    };

    let outcomes = exec::map_indexed(b, options.execution, |r| ctx.replicate(seed, r));
    let k = panel.k();
    let mut beta_stars = Vec::with_capacity(b * k);
    let mut sigma_stars = options.studentize.as_ref().map(|_| Vec::with_capacity(b));
    let mut redraws = 0;
    for outcome in outcomes {
        let (rep, attempts) = outcome?;
        redraws += attempts;
        beta_stars.extend_from_slice(&rep.beta);
        if let (Some(s), Some(sigma)) = (sigma_stars.as_mut(), rep.sigma) {
            s.push(sigma);
        }
    }
    if redraws as f64 > options.max_singular_fraction * b as f64 {
        return Err(Error::ExcessiveSingularRedraws { redraws, replicates: b });
    }
    Ok(BootstrapRun {
        b,
        k,
        beta_stars,
        sigma_stars,
        studentized_for: options.studentize.clone(),
        beta_hat: fit.beta_hat.clone(),
        seed,
        p: geometry.p(),
        q,
        redraws,
    })
}

struct Replicate {
    beta: Vec<f64>,
    sigma: Option<f64>,
}

struct Context<'a> {
    panel: &'a PanelData,
    fit: &'a WithinFit,
    geometry: BlockGeometry,
    options: &'a BootstrapOptions,
    evaluator: Evaluator,
}

enum Evaluator {
    Resample,
    BlockSums(Box<BlockStats>),
}

impl Context<'_> {
    fn replicate(&self, seed: u64, r: usize) -> Result<(Replicate, usize)> {
        let (m, q) = (self.geometry.m(), self.geometry.q());
        for attempt in 0..self.options.max_attempts {
            let mut stream = rng::substream(seed, &[DOMAIN_BOOTSTRAP, r as u64, attempt as u64]);
            let plan = draw_block_plan(m, q, &mut stream)?;
            match self.evaluate(&plan) {
                Ok(rep) => return Ok((rep, attempt)),
                Err(Error::SingularDesign { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ExcessiveSingularRedraws {
            redraws: self.options.max_attempts,
            replicates: 1,
        })
    }

    fn evaluate(&self, plan: &BlockPlan) -> Result<Replicate> {
        match &self.evaluator {
            Evaluator::Resample => {
                let star = resample_panel(self.panel, plan);
                let fit_star = panel::within_group_estimate_with(&star, self.options.rcond_tolerance)?;
                let sigma = match &self.options.studentize {
                    Some(c) => {
                        let v = variance::VarianceEstimates::resampled(self.panel, plan, &fit_star)?;
                        Some(variance::contrast_variance(&v.upsilon, c)?.sqrt())
                    }
                    None => None,
                };
                Ok(Replicate {
                    beta: fit_star.beta_hat,
                    sigma,
                })
            }
            Evaluator::BlockSums(stats) => stats.evaluate(plan, self.fit, self.options),
        }
    }
}

/// Per-unit, per-start block sums of the unit-centered data.
///
/// Centering by the original unit means leaves every bootstrap quantity
/// unchanged (all of them are demeaned again within unit) but keeps the
/// cross-product algebra free of cancellation.
struct BlockStats {
    n: usize,
    m: usize,
    k: usize,
    q: usize,
    positions: usize,
    /// `[i][s][k]`
    sx: Vec<f64>,
    /// `[i][s]`
    sy: Vec<f64>,
    /// `[i][s][k*k]`
    sxx: Vec<f64>,
    /// `[i][s][k]`
    sxy: Vec<f64>,
    /// `[s][k*k]`, summed over units
    txx: Vec<f64>,
    /// `[s][k]`, summed over units
    txy: Vec<f64>,
    /// `[s][k]`, raw squared regressors summed over units (singularity scale)
    raw: Vec<f64>,
}

impl BlockStats {
    fn new(panel: &PanelData, geometry: BlockGeometry) -> Self {
        let (n, m, k) = (panel.n(), panel.m(), panel.k());
        let q = geometry.q();
        let positions = geometry.positions();
        let means = panel::UnitMeans::of(panel);
        let mut sx = vec![0.0; n * positions * k];
        let mut sy = vec![0.0; n * positions];
        let mut sxx = vec![0.0; n * positions * k * k];
        let mut sxy = vec![0.0; n * positions * k];
        let mut txx = vec![0.0; positions * k * k];
        let mut txy = vec![0.0; positions * k];
        let mut raw = vec![0.0; positions * k];
        let mut xc = vec![0.0; m * k];
        let mut yc = vec![0.0; m];
        for i in 0..n {
            let xbar = means.x_of(i, k);
            for (t, row) in panel.unit_x(i).chunks_exact(k).enumerate() {
                for j in 0..k {
                    xc[t * k + j] = row[j] - xbar[j];
                }
            }
            for (t, v) in panel.unit_y(i).iter().enumerate() {
                yc[t] = v - means.y[i];
            }
            for s in 0..positions {
                let cell = i * positions + s;
                let bx = &mut sx[cell * k..(cell + 1) * k];
                let bxx = &mut sxx[cell * k * k..(cell + 1) * k * k];
                let bxy = &mut sxy[cell * k..(cell + 1) * k];
                let mut by = 0.0;
                for t in s..s + q {
                    let xt = &xc[t * k..(t + 1) * k];
                    let yt = yc[t];
                    by += yt;
                    for a in 0..k {
                        bx[a] += xt[a];
                        bxy[a] += xt[a] * yt;
                        for c in 0..k {
                            bxx[a * k + c] += xt[a] * xt[c];
                        }
                    }
                    for (a, xv) in panel.x_at(i, t).iter().enumerate() {
                        raw[s * k + a] += xv * xv;
                    }
                }
                sy[cell] = by;
                for (acc, v) in txx[s * k * k..(s + 1) * k * k].iter_mut().zip(bxx.iter()) {
                    *acc += v;
                }
                for (acc, v) in txy[s * k..(s + 1) * k].iter_mut().zip(bxy.iter()) {
                    *acc += v;
                }
            }
        }
        BlockStats {
            n,
            m,
            k,
            q,
            positions,
            sx,
            sy,
            sxx,
            sxy,
            txx,
            txy,
            raw,
        }
    }

    fn cell(&self, i: usize, s: usize) -> usize {
        i * self.positions + s
    }

    fn evaluate(&self, plan: &BlockPlan, fit: &WithinFit, options: &BootstrapOptions) -> Result<Replicate> {
        let (n, m, k) = (self.n, self.m, self.k);
        let inv_m = 1.0 / m as f64;

        // bootstrap unit sums of centered x and y
        let mut ux = vec![0.0; n * k];
        let mut uy = vec![0.0; n];
        for i in 0..n {
            for &s in plan.starts() {
                let c = self.cell(i, s);
                uy[i] += self.sy[c];
                for (acc, v) in ux[i * k..(i + 1) * k].iter_mut().zip(&self.sx[c * k..(c + 1) * k]) {
                    *acc += v;
                }
            }
        }

        let mut xtx = DMatrix::<f64>::zeros(k, k);
        let mut xty = DVector::<f64>::zeros(k);
        let mut scale = vec![0.0; k];
        for &s in plan.starts() {
            for a in 0..k {
                xty[a] += self.txy[s * k + a];
                scale[a] += self.raw[s * k + a];
                for c in 0..k {
                    xtx[(a, c)] += self.txx[s * k * k + a * k + c];
                }
            }
        }
        for i in 0..n {
            let xi = &ux[i * k..(i + 1) * k];
            for a in 0..k {
                xty[a] -= xi[a] * uy[i] * inv_m;
                for c in 0..k {
                    xtx[(a, c)] -= xi[a] * xi[c] * inv_m;
                }
            }
        }
        let xtx = linalg::symmetrize(&xtx);
        linalg::check_design(&xtx, &scale, options.rcond_tolerance)?;

        // The identity plan reproduces the original sample exactly.
        let beta: Vec<f64> = if plan.is_identity() {
            fit.beta_hat.clone()
        } else {
            linalg::spd_solve(&xtx, &xty)?.iter().copied().collect()
        };

        let sigma = match &options.studentize {
            None => None,
            Some(c) => {
                let omega = self.omega_star(plan, &beta, &ux, &uy);
                let omega = linalg::psd_repair(&omega)?;
                let sigma_star = &xtx / (n * m) as f64;
                let ups = variance::upsilon(&sigma_star, &omega)?;
                Some(variance::contrast_variance(&ups, c)?.sqrt())
            }
        };
        Ok(Replicate { beta, sigma })
    }

    /// Ω̂* from block sums; mirrors `variance::omega_star_resampled`.
    fn omega_star(&self, plan: &BlockPlan, beta: &[f64], ux: &[f64], uy: &[f64]) -> DMatrix<f64> {
        let (n, m, k, q) = (self.n, self.m, self.k, self.q);
        let inv_m = 1.0 / m as f64;
        let qf = q as f64;
        let mut acc = DMatrix::<f64>::zeros(k, k);
        let mut xbar = vec![0.0; k];
        let mut v = vec![0.0; k];
        let mut sxx_beta = vec![0.0; k];
        for i in 0..n {
            for (dst, src) in xbar.iter_mut().zip(&ux[i * k..(i + 1) * k]) {
                *dst = src * inv_m;
            }
            let ybar = uy[i] * inv_m;
            let xbar_beta = panel::dot(&xbar, beta);
            for &s in plan.starts() {
                let c = self.cell(i, s);
                let bx = &self.sx[c * k..(c + 1) * k];
                let by = self.sy[c];
                let bxx = &self.sxx[c * k * k..(c + 1) * k * k];
                let bxy = &self.sxy[c * k..(c + 1) * k];
                let bx_beta = panel::dot(bx, beta);
                for a in 0..k {
                    sxx_beta[a] = panel::dot(&bxx[a * k..(a + 1) * k], beta);
                }
                for a in 0..k {
                    // Σ (x - x̄*)(y - ȳ*)
                    let cross_y = bxy[a] - bx[a] * ybar - xbar[a] * by + qf * xbar[a] * ybar;
                    // Σ (x - x̄*)(x - x̄*)'β
                    let cross_x = sxx_beta[a] - bx[a] * xbar_beta - xbar[a] * bx_beta + qf * xbar[a] * xbar_beta;
                    v[a] = cross_y - cross_x;
                }
                for a in 0..k {
                    for b in 0..k {
                        acc[(a, b)] += v[a] * v[b];
                    }
                }
            }
        }
        acc / (qf * (n * plan.p()) as f64)
    }
}
