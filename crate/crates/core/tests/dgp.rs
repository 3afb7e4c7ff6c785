use panel_mbb::dgp::{self, Ar1Design, LinearSpec, MomentSpec};
use panel_mbb::exec::{self, Execution};
use panel_mbb::montecarlo::mc_standard_error;
use panel_mbb::within_group_estimate;

fn ar1(beta: f64, n: usize, m: usize, seed: u64) -> panel_mbb::PanelData {
    dgp::simulate_ar1(&Ar1Design { beta, n, m, seed }).unwrap()
}

fn mean_var(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn ar1_regressor_variance_matches_stationary_law() {
    for (beta, target, tol) in [(0.0, 1.0, 0.05), (0.9, 1.0 / (1.0 - 0.81), 0.10)] {
        let panel = ar1(beta, 200, 200, 3);
        let (_, var) = mean_var(panel.x().iter().copied());
        assert!((var / target - 1.0).abs() <= tol, "beta {beta}: var {var} vs {target}");
    }
}

#[test]
fn ar1_is_stationary_across_periods() {
    let (n, m) = (4000, 20);
    let panel = ar1(0.7, n, m, 9);
    let target = 1.0 / (1.0 - 0.49);
    let column = |t: usize| mean_var((0..n).map(|i| panel.x_at(i, t)[0]));
    let se_mean = (target / n as f64).sqrt();
    let se_var = target * (2.0 / n as f64).sqrt();
    for t in [0, m / 2, m - 1] {
        let (mean, var) = column(t);
        assert!(mean.abs() <= 4.0 * se_mean, "t={t} mean {mean}");
        assert!((var - target).abs() <= 4.0 * se_var, "t={t} var {var}");
    }
}

fn mean_slope(reps: usize, sim: impl Fn(u64) -> panel_mbb::PanelData + Sync + Send) -> (f64, f64) {
    let rows: Vec<Vec<f64>> = exec::map_indexed(reps, Execution::Parallel, |r| {
        within_group_estimate(&sim(r as u64)).unwrap().beta_hat
    });
    let mean = rows.iter().map(|r| r[0]).sum::<f64>() / reps as f64;
    (mean, mc_standard_error(&rows).unwrap()[0])
}

#[test]
fn within_group_bias_matches_nickell_rate() {
    let (mean, se) = mean_slope(1000, |s| ar1(0.0, 200, 200, 1_000 + s));
    assert!((mean + 0.005).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn strictly_exogenous_design_is_unbiased() {
    let (mean, se) = mean_slope(5000, |s| {
        dgp::simulate_linear(50, 20, &[1.0], LinearSpec::Iid, s).unwrap()
    });
    assert!((mean - 1.0).abs() <= 2.0 * se, "mean {mean}, se {se}");
}

#[test]
fn feedback_design_is_biased_downward() {
    let spec = LinearSpec::Feedback { rho: 0.5, gamma: 0.5 };
    let (mean, se) = mean_slope(300, |s| dgp::simulate_linear(100, 10, &[1.0], spec, s).unwrap());
    assert!(mean - 1.0 < -3.0 * se, "mean {mean}, se {se}");
    let b = dgp::theoretical_bias_b(
        &MomentSpec::Feedback {
            rho: 0.5,
            gamma: 0.5,
            sigma2: 1.0,
            k: 1,
        },
        10,
    )
    .unwrap();
    assert!(b[0] < 0.0);
}

#[test]
fn bias_vector_agrees_with_limit_law_mean() {
    for m in [50, 200, 1000] {
        let n = m;
        let b = dgp::theoretical_bias_b(&MomentSpec::Ar1 { beta: 0.0, sigma2: 1.0 }, m).unwrap()[0];
        let sigma = dgp::ar1_sigma(0.0, 1.0);
        let implied = ((n * m) as f64).sqrt() * b / sigma / m as f64;
        let law = dgp::ar1_limit_law(0.0, n, m).unwrap();
        assert!(
            (implied - law.mean).abs() <= 2.0 / m as f64,
            "m={m}: {implied} vs {}",
            law.mean
        );
    }
}

#[test]
fn bias_vector_converges_to_geometric_limit() {
    for m in [500, 2000] {
        let b = dgp::theoretical_bias_b(&MomentSpec::Ar1 { beta: 0.5, sigma2: 1.0 }, m).unwrap()[0];
        let direct: f64 = -(1..m)
            .map(|tau| (m - tau) as f64 / m as f64 * 0.5f64.powi(tau as i32 - 1))
            .sum::<f64>();
        assert!((b - direct).abs() < 1e-14);
        assert!((b + 2.0).abs() <= 0.02);
    }
}

#[test]
fn fixtures_carry_their_effects() {
    let sample = dgp::simulate_linear_with_effects(5, 30, &[0.5, -1.0], LinearSpec::ZeroNoise, 4).unwrap();
    let fit = within_group_estimate(&sample.panel).unwrap();
    let effects = panel_mbb::panel::recover_fixed_effects(&fit);
    for (a, b) in effects.iter().zip(&sample.alpha) {
        assert!((a - b).abs() < 1e-10);
    }
}
