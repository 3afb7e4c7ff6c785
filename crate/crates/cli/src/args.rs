use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "panel-mbb",
    version,
    about = "Fixed-effects panel estimation with moving block bootstrap inference"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for bootstrap and Monte Carlo loops.
    #[arg(long, global = true, env = "PANEL_MBB_THREADS")]
    pub threads: Option<usize>,
    /// text, csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Within-group estimates with HAC standard errors.
    Estimate(EstimateArgs),
    /// Block bootstrap intervals, bias correction and tests for c'beta.
    Bootstrap(BootstrapArgs),
    /// Simulate a panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo quantile table for the panel AR(1).
    Table1(Table1Args),
    /// List the block lengths that divide m.
    Divisors(DivisorsArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct EstimateArgs {
    /// Long-format CSV: unit,time,y,x1[,x2,...].
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Block length; also the default HAC bandwidth.
    #[arg(long)]
    pub q: Option<usize>,
    /// HAC bandwidth (lags); defaults to q, else floor(4 (m/100)^(2/9)).
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Also report the fixed effects.
    #[arg(long)]
    pub effects: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BootstrapArgs {
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Block length; must divide the number of periods.
    #[arg(long)]
    pub q: Option<usize>,
    /// Bootstrap replications.
    #[arg(long = "B", value_name = "B")]
    pub b: Option<usize>,
    /// Significance levels of the intervals and tests, e.g. 0.05,0.1.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Contrast vector c, e.g. 1,-1; defaults to the first coefficient.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub contrast: Option<Vec<f64>>,
    /// Null values of c'beta to test.
    #[arg(long = "null", value_delimiter = ',', allow_hyphen_values = true)]
    pub nulls: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// ar1, iid, zero-noise, feedback or feedback:RHO,GAMMA.
    #[arg(long)]
    pub spec: Option<String>,
    /// Regressors for the linear designs (ar1 always has one).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Table1Args {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Block lengths, one table row each.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<usize>>,
    /// Monte Carlo replications.
    #[arg(long = "R", value_name = "R")]
    pub r: Option<usize>,
    /// Bootstrap replications per dataset.
    #[arg(long = "B", value_name = "B")]
    pub b: Option<usize>,
    /// Nominal levels at which the bootstrap CDF is evaluated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Significance levels of the coverage and size summaries.
    #[arg(long, value_delimiter = ',')]
    pub coverage: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// R = 10000 and B = 1999 unless given explicitly.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DivisorsArgs {
    #[arg(long)]
    pub m: Option<usize>,
}
