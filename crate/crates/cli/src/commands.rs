//! The five subcommands. Each returns the full report as a string.

use std::fmt::Write as _;
use std::path::Path;

use panel_mbb::dgp::{self, Ar1Design, LinearSpec};
use panel_mbb::inference::{self, CiMethod, InferenceReport};
use panel_mbb::mbb::{self, BlockGeometry};
use panel_mbb::montecarlo::{self, ExperimentSpec};
use panel_mbb::table::{fmt_sig, round_sig, Format};
use panel_mbb::variance::{self, OmegaMethod, VarianceEstimates};
use panel_mbb::{exec, panel, BootstrapOptions, Contrast, Error};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BootstrapConfig, Common, DivisorsConfig, EstimateConfig, SimulateConfig, Table1Config};
use crate::error::{CliError, Result};
use crate::input::{self, LabeledPanel};

fn load_panel(path: &str) -> Result<LabeledPanel> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(Path::new(path), e))?;
    input::read_panel_csv(&bytes)
}

/// Rounds every non-integer number in `v` to 6 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(r) = num.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *num = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

fn config_line<T: Serialize>(config: &T) -> String {
    let mut v = to_value(config);
    round_json(&mut v);
    format!("# config: {v}\n")
}

fn json_document<T: Serialize>(config: &T, body: Value) -> String {
    let mut doc = json!({ "config": to_value(config) });
    if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
        doc.extend(body);
    }
    round_json(&mut doc);
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize to JSON");
    s.push('\n');
    s
}

/// Newey-West style rule `floor(4 (m/100)^(2/9))`, at least 1 and below m.
pub fn default_bandwidth(m: usize) -> usize {
    let rule = (4.0 * (m as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize;
    rule.max(1).min(m.saturating_sub(1))
}

#[derive(Debug, Serialize)]
struct EstimateBody {
    n: usize,
    m: usize,
    k: usize,
    regressors: Vec<String>,
    beta_hat: Vec<f64>,
    std_errors: Vec<f64>,
    sigma_hat: Vec<Vec<f64>>,
    upsilon_hac: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fixed_effects: Option<Vec<(i64, f64)>>,
}

pub fn estimate(mut config: EstimateConfig, common: &Common) -> Result<String> {
    let data = load_panel(&config.input)?;
    let p = &data.panel;
    let bandwidth = config
        .bandwidth
        .or(config.q)
        .unwrap_or_else(|| default_bandwidth(p.m()));
    config.bandwidth = Some(bandwidth);
    let fit = panel::within_group_estimate(p)?;
    let v = VarianceEstimates::from_fit(p, &fit, OmegaMethod::PlugInHac, bandwidth)?;
    let nm = p.nm() as f64;
    let std_errors = (0..fit.k()).map(|j| (v.upsilon[(j, j)].max(0.0) / nm).sqrt()).collect();
    let body = EstimateBody {
        n: p.n(),
        m: p.m(),
        k: p.k(),
        regressors: data.regressors.clone(),
        beta_hat: fit.beta_hat.clone(),
        std_errors,
        sigma_hat: v.sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        upsilon_hac: v.upsilon.row_iter().map(|r| r.iter().copied().collect()).collect(),
        fixed_effects: config.effects.then(|| {
            data.units
                .iter()
                .copied()
                .zip(panel::recover_fixed_effects(&fit))
                .collect()
        }),
    };
    Ok(match common.format {
        Format::Json => json_document(&config, to_value(&body)),
        Format::Csv => {
            let mut out = config_line(&config);
            out.push_str("parameter,estimate,std_error\n");
            for ((name, b), se) in body.regressors.iter().zip(&body.beta_hat).zip(&body.std_errors) {
                let _ = writeln!(out, "{name},{},{}", fmt_sig(*b), fmt_sig(*se));
            }
            for (unit, a) in body.fixed_effects.iter().flatten() {
                let _ = writeln!(out, "alpha_{unit},{},", fmt_sig(*a));
            }
            out
        }
        Format::Text => {
            let mut out = config_line(&config);
            let _ = writeln!(
                out,
                "Within-group estimates (n={}, m={}, HAC bandwidth {bandwidth})",
                body.n, body.m
            );
            let _ = writeln!(out, "{:<12} {:>12} {:>12}", "", "estimate", "std.error");
            for ((name, b), se) in body.regressors.iter().zip(&body.beta_hat).zip(&body.std_errors) {
                let _ = writeln!(out, "{name:<12} {:>12} {:>12}", fmt_sig(*b), fmt_sig(*se));
            }
            write_matrix(&mut out, "Sigma", &body.sigma_hat);
            write_matrix(&mut out, "Upsilon (HAC)", &body.upsilon_hac);
            if let Some(effects) = &body.fixed_effects {
                let _ = writeln!(out, "Fixed effects");
                for (unit, a) in effects {
                    let _ = writeln!(out, "{unit:<12} {:>12}", fmt_sig(*a));
                }
            }
            out
        }
    })
}

fn write_matrix(out: &mut String, title: &str, rows: &[Vec<f64>]) {
    let _ = writeln!(out, "{title}");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{:>12}", fmt_sig(*v))).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

fn method_name(m: CiMethod) -> &'static str {
    match m {
        CiMethod::ReversePercentile => "reverse_percentile",
        CiMethod::Studentized => "studentized",
        CiMethod::NormalApprox => "normal_approx",
    }
}

pub fn bootstrap(mut config: BootstrapConfig, common: &Common) -> Result<String> {
    for &a in &config.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidLevel(a).into());
        }
    }
    if config.b == 0 {
        return Err(Error::EmptyRun.into());
    }
    let data = load_panel(&config.input)?;
    let p = &data.panel;
    BlockGeometry::new(p.m(), config.q)?;
    let contrast = if config.contrast.is_empty() {
        Contrast::unit(p.k(), 0)
    } else if config.contrast.len() != p.k() {
        return Err(Error::DimensionMismatch {
            expected: p.k(),
            found: config.contrast.len(),
        }
        .into());
    } else {
        Contrast::new(config.contrast.clone())?
    };
    config.contrast = contrast.as_slice().to_vec();

    let fit = panel::within_group_estimate(p)?;
    let v = VarianceEstimates::from_fit(p, &fit, OmegaMethod::ClosedFormStar, config.q)?;
    let sigma_hat = variance::contrast_variance(&v.upsilon, &contrast)?.sqrt();
    let options = BootstrapOptions {
        studentize: Some(contrast.clone()),
        ..Default::default()
    };
    let run = exec::with_threads(common.threads, || {
        mbb::bootstrap_distribution_with_fit(p, &fit, config.q, config.b, config.seed, &options)
    })?;
    let report = inference::build_report(&fit, &run, &contrast, sigma_hat, &config.alpha, &config.null)?;
    Ok(match common.format {
        Format::Json => json_document(&config, json!({ "report": to_value(&report) })),
        Format::Csv => config_line(&config) + &bootstrap_csv(&report, &data.regressors),
        Format::Text => config_line(&config) + &bootstrap_text(&report, &data.regressors),
    })
}

fn bootstrap_csv(r: &InferenceReport, names: &[String]) -> String {
    let f = |v: f64| fmt_sig(v);
    let mut out = String::from("record,name,method,alpha,value,lower,upper,p_value,reject\n");
    let _ = writeln!(out, "theta_hat,,,,{},,,,", f(r.theta_hat));
    let _ = writeln!(out, "theta_checked,,,,{},,,,", f(r.theta_checked));
    let _ = writeln!(out, "sigma_hat,,,,{},,,,", f(r.sigma_hat));
    for (name, (b, bc)) in names.iter().zip(r.beta_hat.iter().zip(&r.beta_checked)) {
        let _ = writeln!(out, "beta_hat,{name},,,{},,,,", f(*b));
        let _ = writeln!(out, "beta_checked,{name},,,{},,,,", f(*bc));
    }
    for i in &r.intervals {
        let _ = writeln!(
            out,
            "interval,,{},{},,{},{},,",
            method_name(i.method),
            f(i.alpha),
            f(i.lower),
            f(i.upper)
        );
    }
    for t in &r.tests {
        let _ = writeln!(
            out,
            "test,,{},{},{},,,{},{}",
            method_name(t.method),
            f(t.alpha),
            f(t.theta_null),
            f(t.p_value),
            t.reject
        );
    }
    out
}

fn bootstrap_text(r: &InferenceReport, names: &[String]) -> String {
    let f = |v: f64| fmt_sig(v);
    let mut out = String::new();
    let c: Vec<String> = r.contrast.as_slice().iter().map(|v| f(*v)).collect();
    let _ = writeln!(
        out,
        "Block bootstrap: B={}, q={}, p={}, seed={}, redraws={}",
        r.b, r.q, r.p, r.seed, r.redraws
    );
    let _ = writeln!(out, "contrast c = ({})", c.join(", "));
    let _ = writeln!(out, "{:<12} {:>12} {:>12}", "", "estimate", "corrected");
    for (name, (b, bc)) in names.iter().zip(r.beta_hat.iter().zip(&r.beta_checked)) {
        let _ = writeln!(out, "{name:<12} {:>12} {:>12}", f(*b), f(*bc));
    }
    let _ = writeln!(
        out,
        "{:<12} {:>12} {:>12}",
        "c'beta",
        f(r.theta_hat),
        f(r.theta_checked)
    );
    let _ = writeln!(out, "sigma_hat {}", f(r.sigma_hat));
    let _ = writeln!(out, "Intervals");
    for i in &r.intervals {
        let _ = writeln!(
            out,
            "  {:<20} {:>5.1}%  [{}, {}]",
            method_name(i.method),
            100.0 * (1.0 - i.alpha),
            f(i.lower),
            f(i.upper)
        );
    }
    if !r.tests.is_empty() {
        let _ = writeln!(out, "Tests of c'beta = theta0");
        for t in &r.tests {
            let _ = writeln!(
                out,
                "  {:<20} theta0={} alpha={} p={} {}",
                method_name(t.method),
                f(t.theta_null),
                f(t.alpha),
                f(t.p_value),
                if t.reject { "reject" } else { "do not reject" }
            );
        }
    }
    out
}

pub fn simulate(config: SimulateConfig, common: &Common) -> Result<String> {
    if common.format != Format::Csv {
        return Err(CliError::Usage("simulate writes CSV only".into()));
    }
    let panel = if config.spec.eq_ignore_ascii_case("ar1") {
        dgp::simulate_ar1(&Ar1Design {
            beta: config.beta,
            n: config.n,
            m: config.m,
            seed: config.seed,
        })?
    } else {
        let spec: LinearSpec = config.spec.parse()?;
        dgp::simulate_linear(config.n, config.m, &vec![config.beta; config.k], spec, config.seed)?
    };
    Ok(config_line(&config) + &input::write_panel_csv(&panel))
}

pub fn table1(config: Table1Config, common: &Common) -> Result<String> {
    let specs: Vec<ExperimentSpec> = config
        .designs
        .iter()
        .flat_map(|d| d.q.iter().map(move |&q| (d.n, d.m, q)))
        .map(|(n, m, q)| ExperimentSpec {
            b: config.b,
            r: config.r,
            alpha_grid: config.alpha.clone(),
            coverage_levels: config.coverage.clone(),
            seed: config.seed,
            threads: common.threads,
            ..ExperimentSpec::new(config.beta, n, m, q)
        })
        .collect();
    let report = montecarlo::run_table(&specs)?;
    Ok(match common.format {
        Format::Json => json_document(&config, to_value(&report.to_document())),
        other => config_line(&config) + &montecarlo::emit_table(&report, other)?,
    })
}

pub fn divisors(config: DivisorsConfig, common: &Common) -> Result<String> {
    if config.m == 0 {
        return Err(Error::TooFewPeriods { m: 0 }.into());
    }
    let qs = mbb::valid_block_lengths(config.m);
    Ok(match common.format {
        Format::Json => json_document(&config, json!({ "divisors": qs })),
        Format::Csv => {
            let mut out = config_line(&config) + "q,p\n";
            for q in &qs {
                let _ = writeln!(out, "{q},{}", config.m / q);
            }
            out
        }
        Format::Text => {
            let list: Vec<String> = qs.iter().map(usize::to_string).collect();
            format!("block lengths dividing m={}: {}\n", config.m, list.join(" "))
        }
    })
}
