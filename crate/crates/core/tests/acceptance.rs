//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! `cargo test -p panel-mbb-core --test acceptance [-- FILTER]`

mod common;

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use panel_mbb::dgp::{self, Ar1Design, LinearSpec};
use panel_mbb::exec::{self, Execution};
use panel_mbb::inference;
use panel_mbb::mbb::{self, BootstrapOptions, Engine};
use panel_mbb::montecarlo::{self, ExperimentOutput, ExperimentSpec};
use panel_mbb::panel::{self, Contrast};
use panel_mbb::variance::{self, OmegaMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const TABLE1_200: [(usize, usize, [f64; 3]); 3] = [
    (40, 5, [0.0726, 0.4161, 0.8617]),
    (20, 10, [0.0880, 0.4466, 0.8822]),
    (10, 20, [0.0963, 0.4497, 0.8903]),
];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// AR(1) β = 0, n = m = 200 at desk-scale B; shared between criteria.
type Cache = Mutex<HashMap<(usize, usize), Arc<ExperimentOutput>>>;

fn experiment(q: usize, r: usize) -> Arc<ExperimentOutput> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(out) = cache.lock().unwrap().get(&(q, r)) {
        return out.clone();
    }
    let mut spec = ExperimentSpec::new(0.0, 200, 200, q);
    spec.r = r;
    let out = Arc::new(montecarlo::run_experiment(&spec).expect("experiment failed"));
    cache.lock().unwrap().insert((q, r), out.clone());
    out
}

fn c1_table1_cells() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (_, q, expected) in TABLE1_200 {
        let out = experiment(q, 500);
        for (slot, level_index) in [0usize, 4, 8].into_iter().enumerate() {
            let got = out.row.cells[level_index];
            let good = (got - expected[slot]).abs() <= 0.03;
            ok &= good;
            parts.push(format!(
                "q={q} a={:.1}: {got:.4} vs {:.4}{}",
                out.spec.alpha_grid[level_index],
                expected[slot],
                if good { "" } else { " (out)" }
            ));
        }
    }
    check(ok, format!("tol 0.03; {}", parts.join(", ")))
}

fn c2_ordering() -> Outcome {
    let cells: Vec<f64> = TABLE1_200
        .iter()
        .map(|&(_, q, _)| experiment(q, 500).row.cells[4])
        .collect();
    let gaps = [cells[1] - cells[0], cells[2] - cells[1]];
    check(
        gaps.iter().all(|g| *g > -0.01),
        format!(
            "level 0.5 cells {:.4} / {:.4} / {:.4}, gaps {:+.4} {:+.4} (each > -0.01)",
            cells[0], cells[1], cells[2], gaps[0], gaps[1]
        ),
    )
}

fn c3_nickell_bias() -> Outcome {
    let s = &experiment(10, 1000).summaries;
    check(
        (s.mean_beta_hat - (-0.005)).abs() <= 0.0015,
        format!(
            "mean beta_hat {:.5} (mc se {:.5}), target -0.00500 +- 0.0015",
            s.mean_beta_hat, s.se_beta_hat
        ),
    )
}

fn c4_bias_correction() -> Outcome {
    let s = &experiment(10, 1000).summaries;
    check(
        s.mean_beta_checked.abs() < 0.5 * s.mean_beta_hat.abs(),
        format!(
            "|mean beta_checked| {:.5} < 0.5 * |mean beta_hat| {:.5}",
            s.mean_beta_checked.abs(),
            0.5 * s.mean_beta_hat.abs()
        ),
    )
}

fn c5_coverage() -> Outcome {
    let out = experiment(10, 500);
    let level = &out.summaries.levels[0];
    let rp = level.coverage_reverse_percentile;
    let st = level.coverage_studentized.ok_or("studentized coverage missing")?;
    let inside = |c: f64| (0.86..=0.94).contains(&c);
    check(
        inside(rp) && inside(st),
        format!("90% coverage: reverse-percentile {rp:.3}, studentized {st:.3}, band [0.86, 0.94]"),
    )
}

fn c6_hac_upsilon() -> Outcome {
    let values: Vec<f64> = exec::map_indexed(200, Execution::Parallel, |r| {
        let panel = dgp::simulate_ar1(&Ar1Design {
            beta: 0.0,
            n: 200,
            m: 200,
            seed: 7_000 + r as u64,
        })
        .unwrap();
        let fit = panel::within_group_estimate(&panel).unwrap();
        let est = variance::VarianceEstimates::from_fit(&panel, &fit, OmegaMethod::PlugInHac, 10).unwrap();
        est.upsilon[(0, 0)]
    });
    let median = inference::bootstrap_quantile(&values, 0.5).map_err(|e| e.to_string())?;
    check(
        (0.85..=1.15).contains(&median),
        format!("median HAC upsilon over 200 reps {median:.4}, band [0.85, 1.15]"),
    )
}

fn c7_exhaustive_plans() -> Outcome {
    const B: usize = 50_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (case, &(n, m, q, k)) in [(1, 4, 2, 1), (2, 4, 2, 1), (2, 6, 3, 1), (1, 6, 3, 2), (2, 6, 3, 2)]
        .iter()
        .enumerate()
    {
        let panel = common::random_panel(n, m, k, 100 + case as u64);
        let fit = panel::within_group_estimate(&panel).map_err(|e| e.to_string())?;
        let exact = common::enumerated_beta_stars(&panel, q);
        let run = mbb::bootstrap_distribution(&panel, q, B, 900 + case as u64, &BootstrapOptions::default())
            .map_err(|e| e.to_string())?;
        for j in 0..k {
            let ex: Vec<f64> = exact.iter().map(|b| b[j]).collect();
            let mc: Vec<f64> = (0..B).map(|r| run.beta_star(r)[j]).collect();
            let (mu, var, m4) = common::moments(&ex);
            let (mc_mu, mc_var, _) = common::moments(&mc);
            let se_mean = (var / B as f64).sqrt();
            let se_var = ((m4 - var * var) / B as f64).sqrt();
            let z_mean = (mc_mu - mu) / se_mean;
            let z_var = (mc_var - var) / se_var;
            ok &= z_mean.abs() <= 3.0 && z_var.abs() <= 3.0;
            parts.push(format!("n{n}m{m}q{q}k{k}[{j}] z_mean {z_mean:+.2} z_var {z_var:+.2}"));
        }

        let closed = variance::omega_star_closed_form(&panel, &fit, q).map_err(|e| e.to_string())?;
        let per_unit = common::per_unit_score_variance(&panel, &fit.beta_hat, q);
        let full = common::resampled_score_variance(&panel, &fit.beta_hat, q);
        let scale = closed.amax().max(1.0);
        let identity_err = (0..k * k)
            .map(|e| (closed[(e / k, e % k)] - per_unit[e]).abs())
            .fold(0.0, f64::max);
        ok &= identity_err <= 1e-12 * scale;
        let gap = (closed[(0, 0)] - full[0]).abs() / full[0].max(closed[(0, 0)]);
        parts.push(format!(
            "omega closed {:.4} = per-unit enum (err {identity_err:.1e}); exact conditional {:.4}, rel gap {gap:.3} at q/m {:.2}",
            closed[(0, 0)],
            full[0],
            q as f64 / m as f64
        ));
    }
    check(ok, parts.join("; "))
}

fn c8_exact_identities() -> Outcome {
    let mut notes = Vec::new();

    let panel = dgp::simulate_linear(3, 8, &[0.8, -0.3], LinearSpec::Iid, 11).map_err(|e| e.to_string())?;
    let fit = panel::within_group_estimate(&panel).map_err(|e| e.to_string())?;
    for engine in [Engine::Resample, Engine::BlockSums] {
        let options = BootstrapOptions {
            engine,
            ..Default::default()
        };
        let run = mbb::bootstrap_distribution(&panel, 8, 200, 5, &options).map_err(|e| e.to_string())?;
        if (0..run.b).any(|r| run.beta_star(r) != fit.beta_hat.as_slice()) {
            return Err(format!("q=m replicate differs from beta_hat ({engine:?})"));
        }
    }
    notes.push("q=m bit-exact".to_string());

    let truth = [1.5, -0.7];
    let zero = dgp::simulate_linear(4, 12, &truth, LinearSpec::ZeroNoise, 3).map_err(|e| e.to_string())?;
    let zfit = panel::within_group_estimate(&zero).map_err(|e| e.to_string())?;
    let beta_err = zfit
        .beta_hat
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if beta_err > 1e-10 {
        return Err(format!("zero-noise beta error {beta_err:.2e}"));
    }
    let mut omega_max: f64 = 0.0;
    for method in [OmegaMethod::ClosedFormStar, OmegaMethod::PlugInHac] {
        let est = variance::VarianceEstimates::from_fit(&zero, &zfit, method, 3).map_err(|e| e.to_string())?;
        omega_max = omega_max.max(est.omega.amax());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let plan = mbb::draw_block_plan(12, 3, &mut rng).map_err(|e| e.to_string())?;
        let star = mbb::resample_panel(&zero, &plan);
        let sfit = panel::within_group_estimate(&star).map_err(|e| e.to_string())?;
        let est = variance::VarianceEstimates::resampled(&zero, &plan, &sfit).map_err(|e| e.to_string())?;
        omega_max = omega_max.max(est.omega.amax());
    }
    if omega_max > 1e-20 {
        return Err(format!("zero-noise omega {omega_max:.2e}"));
    }
    notes.push(format!(
        "zero-noise beta err {beta_err:.1e}, max |omega| {omega_max:.1e}"
    ));

    let worst_sum = (0..fit.n)
        .map(|i| fit.unit_residuals(i).iter().sum::<f64>().abs())
        .fold(0.0, f64::max);
    if worst_sum > 1e-10 {
        return Err(format!("unit residual sum {worst_sum:.2e}"));
    }
    notes.push(format!("max unit residual sum {worst_sum:.1e}"));

    let options = BootstrapOptions {
        studentize: Some(Contrast::unit(2, 0)),
        ..Default::default()
    };
    let runs: Vec<_> = [1, 2, 8]
        .into_iter()
        .map(|t| exec::with_threads(Some(t), || mbb::bootstrap_distribution(&panel, 2, 999, 42, &options)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    if runs.iter().any(|r| r != &runs[0]) {
        return Err("bootstrap output depends on the thread count".into());
    }
    let mut spec = ExperimentSpec::new(0.3, 20, 40, 4);
    spec.r = 24;
    spec.b = 99;
    let tables: Vec<_> = [1, 2, 8]
        .into_iter()
        .map(|t| {
            let mut s = spec.clone();
            s.threads = Some(t);
            montecarlo::run_experiment(&s).map(|o| (o.row, o.summaries, o.replications))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    if tables.iter().any(|t| t != &tables[0]) {
        return Err("experiment output depends on the thread count".into());
    }
    notes.push("threads 1/2/8 bit-identical".to_string());
    Ok(notes.join("; "))
}

fn c9_quantile_operator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    for _ in 0..200 {
        let b = rng.random_range(1..=20);
        let sample: Vec<f64> = (0..b).map(|_| rng.random_range(-5i32..=5) as f64 * 0.5).collect();
        let mut grid: Vec<f64> = (1..40).map(|i| i as f64 / 40.0).collect();
        grid.extend((1..b).map(|r| r as f64 / b as f64));
        for alpha in grid {
            let got = inference::bootstrap_quantile(&sample, alpha).map_err(|e| e.to_string())?;
            let want = common::brute_quantile(&sample, alpha);
            if got != want {
                return Err(format!("B={b} alpha={alpha}: {got} vs brute force {want}"));
            }
            checked += 1;
        }
    }
    Ok(format!("200 samples, {checked} (sample, alpha) pairs exactly equal"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 table1-cells", c1_table1_cells),
        ("2 q-ordering", c2_ordering),
        ("3 nickell-bias", c3_nickell_bias),
        ("4 bias-correction", c4_bias_correction),
        ("5 coverage", c5_coverage),
        ("6 hac-upsilon", c6_hac_upsilon),
        ("7 exhaustive-plans", c7_exhaustive_plans),
        ("8 exact-identities", c8_exact_identities),
        ("9 quantile-operator", c9_quantile_operator),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{name}] ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] ({secs:.1}s) {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
