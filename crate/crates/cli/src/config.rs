//! Effective settings: flags, then the config file, then defaults.

use std::path::{Path, PathBuf};

use panel_mbb::montecarlo::default_alpha_grid;
use panel_mbb::table::Format;
use serde::{Deserialize, Serialize};

use crate::args::{BootstrapArgs, DivisorsArgs, EstimateArgs, GlobalArgs, SimulateArgs, Table1Args};
use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_B: usize = 399;
pub const DEFAULT_R: usize = 500;
pub const FULL_B: usize = 1_999;
pub const FULL_R: usize = 10_000;

/// `(n, m)` designs and block lengths of the default quantile table.
pub const DEFAULT_TABLE: [((usize, usize), [usize; 3]); 2] = [((200, 200), [5, 10, 20]), ((500, 500), [10, 20, 25])];

/// Either a single value or a list, for `q` in config files.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Keys accepted in a `--config` TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub q: Option<OneOrMany<usize>>,
    #[serde(alias = "B")]
    pub b: Option<usize>,
    #[serde(alias = "R")]
    pub r: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub coverage: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<String>,
    pub contrast: Option<Vec<f64>>,
    pub null: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub spec: Option<String>,
    pub bandwidth: Option<usize>,
    pub effects: Option<bool>,
    pub paper_scale: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn q_single(&self) -> Result<Option<usize>> {
        match self.q.clone().map(OneOrMany::into_vec) {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => Err(CliError::Config(
                "q must be a single block length for this command".into(),
            )),
        }
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub threads: Option<usize>,
    pub format: Format,
    pub output: Option<PathBuf>,
}

pub fn common(global: &GlobalArgs, file: &FileConfig, default_format: Format) -> Result<Common> {
    let format = match global.format.as_ref().or(file.format.as_ref()) {
        Some(f) => f.parse::<Format>()?,
        None => default_format,
    };
    let threads = global.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok(Common {
        threads,
        format,
        output: global.output.clone(),
    })
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required setting --{flag}")))
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateConfig {
    pub input: String,
    pub q: Option<usize>,
    /// `None` until the panel length is known.
    pub bandwidth: Option<usize>,
    pub effects: bool,
}

impl EstimateConfig {
    pub fn resolve(args: &EstimateArgs, file: &FileConfig) -> Result<Self> {
        let input = require(args.input.clone().or(file.input.clone()), "input")?;
        Ok(EstimateConfig {
            input: path_string(&input),
            q: args.q.or(file.q_single()?),
            bandwidth: args.bandwidth.or(file.bandwidth),
            effects: args.effects || file.effects.unwrap_or(false),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub input: String,
    pub q: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: Vec<f64>,
    pub seed: u64,
    /// Empty means the first unit vector.
    pub contrast: Vec<f64>,
    pub null: Vec<f64>,
}

impl BootstrapConfig {
    pub fn resolve(args: &BootstrapArgs, file: &FileConfig) -> Result<Self> {
        let input = require(args.input.clone().or(file.input.clone()), "input")?;
        Ok(BootstrapConfig {
            input: path_string(&input),
            q: require(args.q.or(file.q_single()?), "q")?,
            b: args.b.or(file.b).unwrap_or(DEFAULT_B),
            alpha: args
                .alpha
                .clone()
                .or(file.alpha.clone())
                .unwrap_or_else(|| vec![0.05, 0.1]),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            contrast: args.contrast.clone().or(file.contrast.clone()).unwrap_or_default(),
            null: args.nulls.clone().or(file.null.clone()).unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub spec: String,
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
}

impl SimulateConfig {
    pub fn resolve(args: &SimulateArgs, file: &FileConfig) -> Result<Self> {
        let spec = args.spec.clone().or(file.spec.clone()).unwrap_or_else(|| "ar1".into());
        let k = args.k.or(file.k).unwrap_or(1);
        if spec.eq_ignore_ascii_case("ar1") && k != 1 {
            return Err(CliError::Usage("the ar1 design has exactly one regressor".into()));
        }
        Ok(SimulateConfig {
            spec,
            beta: args.beta.or(file.beta).unwrap_or(0.0),
            n: require(args.n.or(file.n), "n")?,
            m: require(args.m.or(file.m), "m")?,
            k,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Design {
    pub n: usize,
    pub m: usize,
    pub q: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Config {
    pub beta: f64,
    pub designs: Vec<Table1Design>,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: Vec<f64>,
    pub coverage: Vec<f64>,
    pub seed: u64,
}

impl Table1Config {
    pub fn resolve(args: &Table1Args, file: &FileConfig) -> Result<Self> {
        let full = args.paper_scale || file.paper_scale.unwrap_or(false);
        let q = args.q.clone().or(file.q.clone().map(OneOrMany::into_vec));
        let designs = match (args.n.or(file.n), args.m.or(file.m)) {
            (None, None) => DEFAULT_TABLE
                .iter()
                .map(|&((n, m), qs)| Table1Design {
                    n,
                    m,
                    q: q.clone().unwrap_or_else(|| qs.to_vec()),
                })
                .collect(),
            (Some(n), Some(m)) => {
                let q = match q {
                    Some(q) => q,
                    None => DEFAULT_TABLE
                        .iter()
                        .find(|(nm, _)| *nm == (n, m))
                        .map(|(_, qs)| qs.to_vec())
                        .ok_or_else(|| {
                            CliError::Usage(format!("no default block lengths for (n,m)=({n},{m}); pass --q"))
                        })?,
                };
                vec![Table1Design { n, m, q }]
            }
            _ => return Err(CliError::Usage("--n and --m must be given together".into())),
        };
        Ok(Table1Config {
            beta: args.beta.or(file.beta).unwrap_or(0.0),
            designs,
            r: args.r.or(file.r).unwrap_or(if full { FULL_R } else { DEFAULT_R }),
            b: args.b.or(file.b).unwrap_or(if full { FULL_B } else { DEFAULT_B }),
            alpha: args
                .alpha
                .clone()
                .or(file.alpha.clone())
                .unwrap_or_else(default_alpha_grid),
            coverage: args
                .coverage
                .clone()
                .or(file.coverage.clone())
                .unwrap_or_else(|| vec![0.1]),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisorsConfig {
    pub m: usize,
}

impl DivisorsConfig {
    pub fn resolve(args: &DivisorsArgs, file: &FileConfig) -> Result<Self> {
        Ok(DivisorsConfig {
            m: require(args.m.or(file.m), "m")?,
        })
    }
}
