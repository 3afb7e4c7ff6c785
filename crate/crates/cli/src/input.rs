//! Long-format panel CSV: `unit,time,y,x1[,x2,…]`, one row per
//! (unit, period), rows in any order, `#` comment lines allowed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use panel_mbb::PanelData;

use crate::error::{CliError, Result};

/// A panel together with its unit and time labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanel {
    pub panel: PanelData,
    /// Unit labels in order of first appearance.
    pub units: Vec<i64>,
    /// Sorted time labels shared by all units.
    pub times: Vec<i64>,
    pub regressors: Vec<String>,
}

/// Parses a long-format CSV into a balanced panel.
pub fn parse_panel_csv(bytes: &[u8]) -> Result<PanelData> {
    read_panel_csv(bytes).map(|l| l.panel)
}

type Cell = (f64, Vec<f64>);

pub fn read_panel_csv(bytes: &[u8]) -> Result<LabeledPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::MalformedCsv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected = ["unit", "time", "y"];
    if header.len() < 4 || !header.iter().zip(expected).all(|(h, e)| h.eq_ignore_ascii_case(e)) {
        return Err(CliError::MalformedCsv(format!(
            "header must be unit,time,y,x1[,x2,...], found {}",
            header.join(",")
        )));
    }
    let k = header.len() - 3;

    let mut order: Vec<i64> = Vec::new();
    let mut cells: HashMap<i64, BTreeMap<i64, Cell>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::MalformedCsv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = |col: usize| -> Result<i64> {
            record[col].parse::<i64>().map_err(|_| {
                CliError::MalformedCsv(format!(
                    "line {line}: {} must be an integer, got {:?}",
                    header[col], &record[col]
                ))
            })
        };
        let number = |col: usize| -> Result<f64> {
            let v = record[col].parse::<f64>().map_err(|_| {
                CliError::MalformedCsv(format!(
                    "line {line}: {} is not a number: {:?}",
                    header[col], &record[col]
                ))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::NonFiniteValue {
                    column: header[col].clone(),
                    line,
                })
            }
        };
        let (unit, time) = (label(0)?, label(1)?);
        let y = number(2)?;
        let x = (3..3 + k).map(number).collect::<Result<Vec<f64>>>()?;
        let rows = cells.entry(unit).or_insert_with(|| {
            order.push(unit);
            BTreeMap::new()
        });
        if rows.insert(time, (y, x)).is_some() {
            return Err(CliError::DuplicateCell { unit, time });
        }
    }
    if order.is_empty() {
        return Err(CliError::MalformedCsv("no data rows".into()));
    }

    let times: Vec<i64> = cells
        .values()
        .flat_map(|rows| rows.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (n, m) = (order.len(), times.len());
    let mut y = Vec::with_capacity(n * m);
    let mut x = Vec::with_capacity(n * m * k);
    for unit in &order {
        let rows = &cells[unit];
        if let Some(missing) = times.iter().find(|t| !rows.contains_key(t)) {
            return Err(CliError::UnbalancedPanel(format!(
                "unit {unit} has no row for time {missing}"
            )));
        }
        for (yv, xv) in rows.values() {
            y.push(*yv);
            x.extend_from_slice(xv);
        }
    }
    let panel = PanelData::new(n, m, k, y, x)?;
    Ok(LabeledPanel {
        panel,
        units: order,
        times,
        regressors: header[3..].to_vec(),
    })
}

/// Writes a panel in long format with labels `1..=n` and `1..=m`, full
/// precision.
pub fn write_panel_csv(panel: &PanelData) -> String {
    let mut out = String::from("unit,time,y");
    for j in 1..=panel.k() {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for i in 0..panel.n() {
        for t in 0..panel.m() {
            let _ = write!(out, "{},{},{}", i + 1, t + 1, panel.y_at(i, t));
            for v in panel.x_at(i, t) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}
