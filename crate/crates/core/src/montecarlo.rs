//! Monte Carlo harness for the AR(1) quantile study.
//!
//! Each replication simulates a panel, runs the block bootstrap, and
//! evaluates the bootstrap CDF of `√(nm)(β̂* - β̂)` at the quantiles of the
//! normal limit law (which is not centered at zero). Averaging those CDF
//! values over replications gives one row of a quantile table; values close
//! to the nominal levels mean the bootstrap reproduces the limit law,
//! bias included. The same replications also yield bias, coverage, size and
//! variance summaries.

use serde::{Deserialize, Serialize};

use crate::dgp::{self, Ar1Design};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::inference::{self, CiMethod};
use crate::mbb::{self, BlockGeometry, BootstrapOptions, Engine};
use crate::panel::{self, Contrast};
use crate::rng::{self, DOMAIN_BOOTSTRAP, DOMAIN_DATA};
use crate::table::{self, Format, QuantileRow, QuantileTable};
use crate::variance::{self, OmegaMethod};

/// The nine nominal levels 0.1, 0.2, …, 0.9.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    /// Block length; `p = m / q`.
    pub q: usize,
    /// Bootstrap replications per dataset.
    pub b: usize,
    /// Monte Carlo replications.
    pub r: usize,
    /// Nominal levels at which the bootstrap CDF is evaluated.
    pub alpha_grid: Vec<f64>,
    /// Significance levels for the coverage and size summaries.
    pub coverage_levels: Vec<f64>,
    /// Also compute studentized intervals and tests.
    pub studentize: bool,
    pub seed: u64,
    /// Worker count; `None` uses the global pool. Not serialized, since it
    /// never changes results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    /// Desk-scale defaults: R = 500, B = 399, the nine-level grid, 90%
    /// intervals.
    pub fn new(beta: f64, n: usize, m: usize, q: usize) -> Self {
        ExperimentSpec {
            beta,
            n,
            m,
            q,
            b: 399,
            r: 500,
            alpha_grid: default_alpha_grid(),
            coverage_levels: vec![0.1],
            studentize: true,
            seed: 20240917,
            threads: None,
        }
    }

    /// R = 10 000, B = 1 999.
    pub fn full_scale(mut self) -> Self {
        self.r = 10_000;
        self.b = 1_999;
        self
    }

    pub fn validate(&self) -> Result<BlockGeometry> {
        Ar1Design {
            beta: self.beta,
            n: self.n,
            m: self.m,
            seed: self.seed,
        }
        .validate()?;
        let geometry = BlockGeometry::new(self.m, self.q)?;
        if self.b == 0 {
            return Err(Error::EmptyRun);
        }
        if self.r < 2 {
            return Err(Error::InsufficientReps { reps: self.r });
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidArgument("alpha grid is empty".into()));
        }
        for &a in self.alpha_grid.iter().chain(&self.coverage_levels) {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidLevel(a));
            }
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("alpha grid must be strictly increasing".into()));
        }
        Ok(geometry)
    }

    /// Dataset design of replication `r`.
    pub fn design(&self, r: usize) -> Ar1Design {
        Ar1Design {
            beta: self.beta,
            n: self.n,
            m: self.m,
            seed: rng::derive_seed(self.seed, &[DOMAIN_DATA, r as u64]),
        }
    }

    /// Bootstrap seed of replication `r`.
    pub fn bootstrap_seed(&self, r: usize) -> u64 {
        rng::derive_seed(self.seed, &[DOMAIN_BOOTSTRAP, r as u64])
    }
}

/// Everything one replication contributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub beta_hat: f64,
    pub beta_checked: f64,
    pub cells: Vec<f64>,
    /// Per coverage level: reverse-percentile interval contains β.
    pub covered_rp: Vec<bool>,
    pub covered_st: Vec<bool>,
    pub rejected_rp: Vec<bool>,
    pub rejected_st: Vec<bool>,
    /// `Υ̂` with the HAC Ω̂, bandwidth q.
    pub upsilon_hac: f64,
    /// `Υ̂` with the closed-form bootstrap Ω̂.
    pub upsilon_closed_form: f64,
    pub redraws: usize,
}

/// Coverage and rejection rates at one significance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub alpha: f64,
    pub coverage_reverse_percentile: f64,
    pub coverage_studentized: Option<f64>,
    pub rejection_reverse_percentile: f64,
    pub rejection_studentized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summaries {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub b: usize,
    pub mean_beta_hat: f64,
    pub se_beta_hat: f64,
    pub mean_beta_checked: f64,
    pub se_beta_checked: f64,
    /// Theoretical `-(1+β)/m`.
    pub nickell_bias: f64,
    pub levels: Vec<LevelSummary>,
    pub median_upsilon_hac: f64,
    pub median_upsilon_closed_form: f64,
    pub total_redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub row: QuantileRow,
    pub summaries: Summaries,
    #[serde(skip)]
    pub replications: Vec<ReplicationResult>,
}

/// One complete replication; a pure function of `(spec, r)`.
pub fn run_replication(spec: &ExperimentSpec, r: usize) -> Result<ReplicationResult> {
    let design = spec.design(r);
    let panel = dgp::simulate_ar1(&design)?;
    let fit = panel::within_group_estimate(&panel)?;
    let c = Contrast::unit(1, 0);
    let options = BootstrapOptions {
        studentize: spec.studentize.then(|| c.clone()),
        engine: Engine::BlockSums,
        execution: Execution::Sequential,
        ..Default::default()
    };
    let run = mbb::bootstrap_distribution_with_fit(&panel, &fit, spec.q, spec.b, spec.bootstrap_seed(r), &options)?;

    let scale = (panel.nm() as f64).sqrt();
    let scaled: Vec<f64> = run.deltas(&c)?.iter().map(|d| d * scale).collect();
    let sorted = inference::sorted(&scaled);
    let law = dgp::ar1_limit_law(spec.beta, spec.n, spec.m)?;
    let cells = spec
        .alpha_grid
        .iter()
        .map(|&a| inference::empirical_cdf(&sorted, law.quantile(a)))
        .collect();

    let beta_checked = inference::bias_corrected_estimate(&fit, &run)?[0];
    let hac = variance::VarianceEstimates::from_fit(&panel, &fit, OmegaMethod::PlugInHac, spec.q)?;
    let closed = variance::VarianceEstimates::from_fit(&panel, &fit, OmegaMethod::ClosedFormStar, spec.q)?;
    let sigma_hat = variance::contrast_variance(&closed.upsilon, &c)?.sqrt();

    let mut out = ReplicationResult {
        beta_hat: fit.beta_hat[0],
        beta_checked,
        cells,
        covered_rp: Vec::new(),
        covered_st: Vec::new(),
        rejected_rp: Vec::new(),
        rejected_st: Vec::new(),
        upsilon_hac: hac.upsilon[(0, 0)],
        upsilon_closed_form: closed.upsilon[(0, 0)],
        redraws: run.redraws,
    };
    for &alpha in &spec.coverage_levels {
        let ci = inference::reverse_percentile_ci(&run, &c, alpha)?;
        out.covered_rp.push(ci.contains(spec.beta));
        let t = inference::test_linear_hypothesis(&run, &c, spec.beta, CiMethod::ReversePercentile, None, alpha)?;
        out.rejected_rp.push(t.reject);
        if spec.studentize {
            let ci = inference::studentized_ci(&run, &c, sigma_hat, alpha)?;
            out.covered_st.push(ci.contains(spec.beta));
            let t =
                inference::test_linear_hypothesis(&run, &c, spec.beta, CiMethod::Studentized, Some(sigma_hat), alpha)?;
            out.rejected_st.push(t.reject);
        }
    }
    Ok(out)
}

/// Runs all replications (in parallel when enabled) and aggregates them in
/// replication order, so the output does not depend on the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    run_experiment_with(spec, Execution::Parallel)
}

pub fn run_experiment_with(spec: &ExperimentSpec, execution: Execution) -> Result<ExperimentOutput> {
    let geometry = spec.validate()?;
    let results: Vec<ReplicationResult> = exec::with_threads(spec.threads, || {
        exec::map_indexed(spec.r, execution, |r| run_replication(spec, r))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let cells: Vec<Vec<f64>> = results.iter().map(|r| r.cells.clone()).collect();
    let row = QuantileRow {
        n: spec.n,
        m: spec.m,
        p: geometry.p(),
        q: spec.q,
        cells: column_means(&cells),
        mc_se: mc_standard_error(&cells)?,
    };
    let summaries = summarize(spec, geometry, &results)?;
    Ok(ExperimentOutput {
        spec: spec.clone(),
        row,
        summaries,
        replications: results,
    })
}

fn summarize(spec: &ExperimentSpec, geometry: BlockGeometry, results: &[ReplicationResult]) -> Result<Summaries> {
    let r = results.len() as f64;
    let rate = |f: &dyn Fn(&ReplicationResult) -> bool| results.iter().filter(|x| f(x)).count() as f64 / r;
    let levels = spec
        .coverage_levels
        .iter()
        .enumerate()
        .map(|(j, &alpha)| LevelSummary {
            alpha,
            coverage_reverse_percentile: rate(&|x| x.covered_rp[j]),
            coverage_studentized: spec.studentize.then(|| rate(&|x| x.covered_st[j])),
            rejection_reverse_percentile: rate(&|x| x.rejected_rp[j]),
            rejection_studentized: spec.studentize.then(|| rate(&|x| x.rejected_st[j])),
        })
        .collect();
    let beta_hat: Vec<Vec<f64>> = results.iter().map(|x| vec![x.beta_hat]).collect();
    let beta_checked: Vec<Vec<f64>> = results.iter().map(|x| vec![x.beta_checked]).collect();
    let hac: Vec<f64> = results.iter().map(|x| x.upsilon_hac).collect();
    let cf: Vec<f64> = results.iter().map(|x| x.upsilon_closed_form).collect();
    Ok(Summaries {
        n: spec.n,
        m: spec.m,
        p: geometry.p(),
        q: spec.q,
        r: results.len(),
        b: spec.b,
        mean_beta_hat: column_means(&beta_hat)[0],
        se_beta_hat: mc_standard_error(&beta_hat)?[0],
        mean_beta_checked: column_means(&beta_checked)[0],
        se_beta_checked: mc_standard_error(&beta_checked)?[0],
        nickell_bias: -(1.0 + spec.beta) / spec.m as f64,
        levels,
        median_upsilon_hac: inference::bootstrap_quantile(&hac, 0.5)?,
        median_upsilon_closed_form: inference::bootstrap_quantile(&cf, 0.5)?,
        total_redraws: results.iter().map(|x| x.redraws).sum(),
    })
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let width = rows.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; width];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / rows.len() as f64).collect()
}

/// Per-column sample standard deviation over `√R`; `rows` is `R` rows of
/// equal width.
pub fn mc_standard_error(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let reps = rows.len();
    if reps < 2 {
        return Err(Error::InsufficientReps { reps });
    }
    // shifted by the first row, so identical rows give exactly zero
    let origin = &rows[0];
    let width = origin.len();
    let mut sum = vec![0.0; width];
    let mut ss = vec![0.0; width];
    for row in rows {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: row.len(),
            });
        }
        for j in 0..width {
            let d = row[j] - origin[j];
            sum[j] += d;
            ss[j] += d * d;
        }
    }
    let rf = reps as f64;
    Ok(sum
        .iter()
        .zip(&ss)
        .map(|(s, q)| ((q - s * s / rf).max(0.0) / (rf - 1.0)).sqrt() / rf.sqrt())
        .collect())
}

/// Several experiments sharing one alpha grid, e.g. the rows of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub specs: Vec<ExperimentSpec>,
    pub table: QuantileTable,
    pub summaries: Vec<Summaries>,
}

pub fn run_table(specs: &[ExperimentSpec]) -> Result<TableReport> {
    let first = specs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no experiments requested".into()))?;
    // fail fast before any simulation work
    for spec in specs {
        spec.validate()?;
        if spec.alpha_grid != first.alpha_grid {
            return Err(Error::InvalidArgument("all rows must share one alpha grid".into()));
        }
    }
    let mut rows = Vec::with_capacity(specs.len());
    let mut summaries = Vec::with_capacity(specs.len());
    for spec in specs {
        let out = run_experiment(spec)?;
        rows.push(out.row);
        summaries.push(out.summaries);
    }
    Ok(TableReport {
        specs: specs.to_vec(),
        table: QuantileTable {
            levels: first.alpha_grid.clone(),
            rows,
        },
        summaries,
    })
}

/// JSON document `{spec, levels, rows[], summaries[]}` with floats rounded
/// to 6 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub spec: Vec<ExperimentSpec>,
    pub levels: Vec<f64>,
    pub rows: Vec<QuantileRow>,
    pub summaries: Vec<Summaries>,
}

impl TableReport {
    pub fn to_document(&self) -> TableDocument {
        let table = self.table.rounded();
        TableDocument {
            spec: self.specs.clone(),
            levels: table.levels,
            rows: table.rows,
            summaries: self.summaries.iter().map(round_summaries).collect(),
        }
    }
}

fn round_summaries(s: &Summaries) -> Summaries {
    let r = table::round_sig;
    Summaries {
        mean_beta_hat: r(s.mean_beta_hat),
        se_beta_hat: r(s.se_beta_hat),
        mean_beta_checked: r(s.mean_beta_checked),
        se_beta_checked: r(s.se_beta_checked),
        nickell_bias: r(s.nickell_bias),
        median_upsilon_hac: r(s.median_upsilon_hac),
        median_upsilon_closed_form: r(s.median_upsilon_closed_form),
        levels: s
            .levels
            .iter()
            .map(|l| LevelSummary {
                alpha: r(l.alpha),
                coverage_reverse_percentile: r(l.coverage_reverse_percentile),
                coverage_studentized: l.coverage_studentized.map(r),
                rejection_reverse_percentile: r(l.rejection_reverse_percentile),
                rejection_studentized: l.rejection_studentized.map(r),
            })
            .collect(),
        ..s.clone()
    }
}

/// Serializes a table report.
pub fn emit_table(report: &TableReport, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(report.table.to_csv()),
        Format::Json => serde_json::to_string_pretty(&report.to_document())
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::InvalidArgument(e.to_string())),
        Format::Text => {
            let mut out = String::from("Quantile estimates\n");
            out.push_str(&report.table.to_text());
            out.push('\n');
            for s in &report.summaries {
                out.push_str(&summary_text(s));
            }
            Ok(out)
        }
    }
}

fn summary_text(s: &Summaries) -> String {
    use std::fmt::Write as _;
    let f = table::fmt_sig;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "(n,m)=({},{}) p={} q={} R={} B={}: mean beta_hat {} (s.e. {}), mean bias-corrected {} (s.e. {}), theoretical bias {}",
        s.n,
        s.m,
        s.p,
        s.q,
        s.r,
        s.b,
        f(s.mean_beta_hat),
        f(s.se_beta_hat),
        f(s.mean_beta_checked),
        f(s.se_beta_checked),
        f(s.nickell_bias)
    );
    for l in &s.levels {
        let _ = write!(
            out,
            "  level {}: coverage reverse-percentile {}",
            f(1.0 - l.alpha),
            f(l.coverage_reverse_percentile)
        );
        if let Some(c) = l.coverage_studentized {
            let _ = write!(out, ", studentized {}", f(c));
        }
        let _ = write!(out, "; size reverse-percentile {}", f(l.rejection_reverse_percentile));
        if let Some(r) = l.rejection_studentized {
            let _ = write!(out, ", studentized {}", f(r));
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "  median upsilon: HAC {}, closed-form {}; singular redraws {}",
        f(s.median_upsilon_hac),
        f(s.median_upsilon_closed_form),
        s.total_redraws
    );
    out
}
