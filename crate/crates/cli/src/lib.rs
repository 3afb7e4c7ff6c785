//! Command-line front end: long-format CSV input, TOML configuration and
//! the `estimate`, `bootstrap`, `simulate`, `table1` and `divisors`
//! commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod input;

use panel_mbb::table::Format;

pub use args::Cli;
pub use error::{CliError, Result};

use args::Command;
use config::{BootstrapConfig, DivisorsConfig, EstimateConfig, FileConfig, SimulateConfig, Table1Config};

/// Runs the parsed command and returns its report.
pub fn run(cli: &Cli) -> Result<String> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let default_format = match cli.command {
        Command::Simulate(_) => Format::Csv,
        _ => Format::Text,
    };
    let common = config::common(&cli.global, &file, default_format)?;
    match &cli.command {
        Command::Estimate(a) => commands::estimate(EstimateConfig::resolve(a, &file)?, &common),
        Command::Bootstrap(a) => commands::bootstrap(BootstrapConfig::resolve(a, &file)?, &common),
        Command::Simulate(a) => commands::simulate(SimulateConfig::resolve(a, &file)?, &common),
        Command::Table1(a) => commands::table1(Table1Config::resolve(a, &file)?, &common),
        Command::Divisors(a) => commands::divisors(DivisorsConfig::resolve(a, &file)?, &common),
    }
}

/// Runs the command and writes its report to `--output` or stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    let report = run(cli)?;
    match &cli.global.output {
        Some(path) => std::fs::write(path, report).map_err(|e| CliError::io(path, e)),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(report.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))
        }
    }
}
