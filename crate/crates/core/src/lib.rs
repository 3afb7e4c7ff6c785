//! Fixed-effects (within-group) estimation for balanced linear panels with
//! moving block bootstrap inference.
//!
//! The bootstrap resamples blocks of consecutive time periods jointly for all
//! units. Its distribution of `√(nm)(β̂* - β̂)` reproduces the limit law of
//! the within-group estimator including its `O(√(n/m))` bias, so
//! reverse-percentile and studentized intervals are valid without a bias
//! adjustment, and the bootstrap median yields a bias-corrected estimate.
//!
//! Modules:
//! - [`panel`]: data model, within transformation, estimator.
//! - [`mbb`]: block plans, resampling, bootstrap distribution.
//! - [`variance`]: Σ̂, the three Ω̂ estimators, sandwich Υ̂.
//! - [`inference`]: quantiles, intervals, bias correction, tests.
//! - [`dgp`]: simulation designs and analytic oracles.
//! - [`montecarlo`]: the quantile-table experiment harness.
//!
//! The `parallel` feature (on by default) runs bootstrap replicates and Monte
//! Carlo replications on rayon; results are identical to sequential runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dgp;
pub mod error;
pub mod exec;
pub mod inference;
pub mod linalg;
pub mod mbb;
pub mod montecarlo;
pub mod normal;
pub mod panel;
pub mod rng;
pub mod table;
pub mod variance;

pub use error::{Error, Result};
pub use exec::Execution;
pub use mbb::{bootstrap_distribution, BlockPlan, BootstrapOptions, BootstrapRun, Engine};
pub use panel::{within_group_estimate, Contrast, PanelData, WithinFit};
