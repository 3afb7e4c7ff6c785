//! Quantile tables and their text, CSV and JSON serializations.
//!
//! Every float is written with 6 significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output format for tables and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Formats `x` with 6 significant digits, `%g` style.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // exponent after rounding to DIGITS significant digits
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds to the value that [`fmt_sig`] prints.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().expect("fmt_sig output parses")
    } else {
        x
    }
}

/// One `(n, m, p, q)` row of averaged bootstrap CDF values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    /// Average of `P*(√(nm)(β̂* - β̂) ≤ limit quantile)` per nominal level.
    pub cells: Vec<f64>,
    pub mc_se: Vec<f64>,
}

/// Rows sharing one grid of nominal levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub levels: Vec<f64>,
    pub rows: Vec<QuantileRow>,
}

impl QuantileTable {
    /// The same table with every float rounded to 6 significant digits.
    pub fn rounded(&self) -> QuantileTable {
        QuantileTable {
            levels: self.levels.iter().map(|v| round_sig(*v)).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| QuantileRow {
                    cells: r.cells.iter().map(|v| round_sig(*v)).collect(),
                    mc_se: r.mc_se.iter().map(|v| round_sig(*v)).collect(),
                    ..r.clone()
                })
                .collect(),
        }
    }

    /// Long-format CSV with header `n,m,p,q,level,cell,mc_se`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,p,q,level,cell,mc_se\n");
        for row in &self.rows {
            for ((level, cell), se) in self.levels.iter().zip(&row.cells).zip(&row.mc_se) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.n,
                    row.m,
                    row.p,
                    row.q,
                    fmt_sig(*level),
                    fmt_sig(*cell),
                    fmt_sig(*se)
                );
            }
        }
        out
    }

    /// Parses the output of [`QuantileTable::to_csv`]; lines starting with
    /// `#` are comments.
    pub fn from_csv(text: &str) -> Result<QuantileTable> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedTable("empty input".into()))?;
        if header.trim() != "n,m,p,q,level,cell,mc_se" {
            return Err(Error::MalformedTable(format!("unexpected header {header:?}")));
        }
        let mut levels: Vec<f64> = Vec::new();
        let mut rows: Vec<QuantileRow> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 7 {
                return Err(Error::MalformedTable(format!(
                    "line {}: {} fields",
                    lineno + 2,
                    f.len()
                )));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::MalformedTable(format!("line {}: bad integer {s:?}", lineno + 2)))
            };
            let float = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::MalformedTable(format!("line {}: bad number {s:?}", lineno + 2)))
            };
            let key = (int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?);
            let (level, cell, se) = (float(f[4])?, float(f[5])?, float(f[6])?);
            if rows.last().is_none_or(|r| (r.n, r.m, r.p, r.q) != key) {
                rows.push(QuantileRow {
                    n: key.0,
                    m: key.1,
                    p: key.2,
                    q: key.3,
                    cells: Vec::new(),
                    mc_se: Vec::new(),
                });
            }
            let idx = rows.last().map_or(0, |r| r.cells.len());
            if rows.len() == 1 {
                levels.push(level);
            } else if levels.get(idx) != Some(&level) {
                return Err(Error::MalformedTable(format!(
                    "line {}: level {level} does not match the first row's grid",
                    lineno + 2
                )));
            }
            let row = rows.last_mut().expect("row exists");
            row.cells.push(cell);
            row.mc_se.push(se);
        }
        if rows.iter().any(|r| r.cells.len() != levels.len()) {
            return Err(Error::MalformedTable("rows have different numbers of levels".into()));
        }
        Ok(QuantileTable { levels, rows })
    }

    /// Plain-text layout: `p q` then one column per level, grouped under
    /// `(n,m)` headings, each row followed by its MC standard errors.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>5} {:>5}", "p", "q");
        for level in &self.levels {
            let _ = write!(out, " {:>9}", fmt_sig(*level));
        }
        out.push('\n');
        let mut current: Option<(usize, usize)> = None;
        for row in &self.rows {
            if current != Some((row.n, row.m)) {
                let _ = writeln!(out, "(n,m)=({},{})", row.n, row.m);
                current = Some((row.n, row.m));
            }
            let _ = write!(out, "{:>5} {:>5}", row.p, row.q);
            for cell in &row.cells {
                let _ = write!(out, " {:>9}", fmt_sig(*cell));
            }
            out.push('\n');
            let _ = write!(out, "{:>11}", "(s.e.)");
            for se in &row.mc_se {
                let _ = write!(out, " {:>9}", fmt_sig(*se));
            }
            out.push('\n');
        }
        out
    }
}
