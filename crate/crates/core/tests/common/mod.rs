//! Brute-force oracles shared by the integration suites. Everything here is
//! computed from first principles on tiny panels, without the library's
//! estimator or variance code.

#![allow(dead_code)]

use panel_mbb::mbb::{self, BlockPlan};
use panel_mbb::PanelData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Panel with entries uniform on (-2, 2) plus a unit shift.
pub fn random_panel(n: usize, m: usize, k: usize, seed: u64) -> PanelData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n * m);
    let mut x = Vec::with_capacity(n * m * k);
    for _ in 0..n {
        let shift: f64 = rng.random_range(-3.0..3.0);
        for _ in 0..m {
            y.push(shift + rng.random_range(-2.0..2.0));
            for _ in 0..k {
                x.push(0.5 * shift + rng.random_range(-2.0..2.0));
            }
        }
    }
    PanelData::new(n, m, k, y, x).unwrap()
}

/// Within-unit demeaned `(y, x)` computed directly.
pub fn demean(panel: &PanelData) -> (Vec<f64>, Vec<f64>) {
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    let mut yd = Vec::with_capacity(n * m);
    let mut xd = Vec::with_capacity(n * m * k);
    for i in 0..n {
        let ybar = (0..m).map(|t| panel.y_at(i, t)).sum::<f64>() / m as f64;
        let xbar: Vec<f64> = (0..k)
            .map(|j| (0..m).map(|t| panel.x_at(i, t)[j]).sum::<f64>() / m as f64)
            .collect();
        for t in 0..m {
            yd.push(panel.y_at(i, t) - ybar);
            xd.extend(panel.x_at(i, t).iter().zip(&xbar).map(|(x, b)| x - b));
        }
    }
    (yd, xd)
}

/// Pooled OLS of demeaned y on demeaned x through explicit 1×1 or 2×2
/// inverses. `None` when the normal matrix is (numerically) singular.
pub fn brute_ols(panel: &PanelData) -> Option<Vec<f64>> {
    let k = panel.k();
    let (yd, xd) = demean(panel);
    match k {
        1 => {
            let sxx: f64 = xd.iter().map(|v| v * v).sum();
            let sxy: f64 = xd.iter().zip(&yd).map(|(a, b)| a * b).sum();
            let raw: f64 = panel.x().iter().map(|v| v * v).sum();
            (sxx > 1e-10 * raw.max(1e-300)).then(|| vec![sxy / sxx])
        }
        2 => {
            let (mut a, mut b, mut d, mut u, mut v) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (row, y) in xd.chunks_exact(2).zip(&yd) {
                a += row[0] * row[0];
                b += row[0] * row[1];
                d += row[1] * row[1];
                u += row[0] * y;
                v += row[1] * y;
            }
            let det = a * d - b * b;
            if det.abs() <= 1e-10 * (a * d).max(1e-300) {
                return None;
            }
            Some(vec![(d * u - b * v) / det, (a * v - b * u) / det])
        }
        _ => panic!("brute_ols handles k <= 2"),
    }
}

/// Every block plan for `(m, q)`, each equally likely under the bootstrap.
pub fn all_plans(m: usize, q: usize) -> Vec<BlockPlan> {
    let p = m / q;
    let positions = m - q + 1;
    let total = positions.pow(p as u32);
    (0..total)
        .map(|mut code| {
            let mut starts = vec![0; p];
            for s in starts.iter_mut() {
                *s = code % positions;
                code /= positions;
            }
            BlockPlan::new(m, q, starts).unwrap()
        })
        .collect()
}

/// Exact bootstrap distribution of `β̂*` by enumeration; singular plans are
/// dropped, which is what redrawing them amounts to.
pub fn enumerated_beta_stars(panel: &PanelData, q: usize) -> Vec<Vec<f64>> {
    all_plans(panel.m(), q)
        .iter()
        .filter_map(|plan| brute_ols(&mbb::resample_panel(panel, plan)))
        .collect()
}

/// Per-period scores `(x_it - x̄_i) ε̂_it`, unit-major, `k` per period.
pub fn scores(panel: &PanelData, beta: &[f64]) -> Vec<f64> {
    let k = panel.k();
    let (yd, xd) = demean(panel);
    let mut g = Vec::with_capacity(xd.len());
    for (row, y) in xd.chunks_exact(k).zip(&yd) {
        let e = y - row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        g.extend(row.iter().map(|z| z * e));
    }
    g
}

/// Population covariance (k×k, row-major) of equally weighted vectors.
pub fn covariance(samples: &[Vec<f64>]) -> Vec<f64> {
    let k = samples[0].len();
    let nf = samples.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / nf).collect();
    let mut cov = vec![0.0; k * k];
    for s in samples {
        for a in 0..k {
            for b in 0..k {
                cov[a * k + b] += (s[a] - mean[a]) * (s[b] - mean[b]) / nf;
            }
        }
    }
    cov
}

/// Average over units of the exact plan variance of
/// `W_i = m^{-1/2} Σ_t g_{i,src(t)}`, with the full-sample scores `g`.
pub fn per_unit_score_variance(panel: &PanelData, beta: &[f64], q: usize) -> Vec<f64> {
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    let g = scores(panel, beta);
    let plans = all_plans(m, q);
    let mut total = vec![0.0; k * k];
    for i in 0..n {
        let w: Vec<Vec<f64>> = plans
            .iter()
            .map(|plan| {
                let mut acc = vec![0.0; k];
                for t in 0..m {
                    let s = plan.source_period(t);
                    for j in 0..k {
                        acc[j] += g[(i * m + s) * k + j];
                    }
                }
                acc.iter().map(|v| v / (m as f64).sqrt()).collect()
            })
            .collect();
        for (tot, c) in total.iter_mut().zip(covariance(&w)) {
            *tot += c / n as f64;
        }
    }
    total
}

/// Exact conditional variance over all plans of the resampled score
/// `(nm)^{-1/2} Σ_i Σ_t (x*_it - x̄*_i)((y*_it - ȳ*_i) - (x*_it - x̄*_i)'β)`.
pub fn resampled_score_variance(panel: &PanelData, beta: &[f64], q: usize) -> Vec<f64> {
    let (n, m, k) = (panel.n(), panel.m(), panel.k());
    let scale = ((n * m) as f64).sqrt();
    let samples: Vec<Vec<f64>> = all_plans(m, q)
        .iter()
        .map(|plan| {
            let star = mbb::resample_panel(panel, plan);
            let g = scores(&star, beta);
            let mut acc = vec![0.0; k];
            for row in g.chunks_exact(k) {
                for j in 0..k {
                    acc[j] += row[j];
                }
            }
            acc.iter().map(|v| v / scale).collect()
        })
        .collect();
    covariance(&samples)
}

/// `inf{x in sample : #{v ≤ x}/B ≥ α}` by scanning every element.
pub fn brute_quantile(sample: &[f64], alpha: f64) -> f64 {
    let b = sample.len() as f64;
    sample
        .iter()
        .copied()
        .filter(|&x| {
            let count = sample.iter().filter(|&&v| v <= x).count() as f64;
            count / b >= alpha
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mean, variance and fourth central moment of equally weighted values.
pub fn moments(values: &[f64]) -> (f64, f64, f64) {
    let nf = values.len() as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    (mean, var, m4)
}
