//! File formats.
//!
//! Matrices are dense row-major CSV (one matrix row per line) or JSON
//! `{"n1", "n2", "data": [row-major]}`. In CSV an empty field or `nan` marks
//! an unobserved entry. Observations are CSV rows `i,j,value` with zero-based
//! indices. Constraint files are JSON
//! `{"n1", "n2", "constraints": [{"terms": [[i, j, coeff], ...], "rhs": b}]}`.
//! Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gridfill::linalg::Matrix;
use gridfill::solver::{Entry, LinearConstraint};
use gridfill::Error;
use serde::{Deserialize, Serialize};

/// Marks a failure as bad input (exit code 2).
pub fn parse_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Parse(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn csv_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| parse_error(format!("{}: {e}", path.display())))
}

fn parse_cell(s: &str, path: &Path, line: usize) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse::<f64>()
        .map_err(|_| parse_error(format!("{}: row {line}: bad number {s:?}", path.display())))
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixJson {
    n1: usize,
    n2: usize,
    data: Vec<f64>,
}

/// Reads a matrix; unobserved entries come back as NaN.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    if path.extension().is_some_and(|e| e == "json") {
        let m: MatrixJson = serde_json::from_str(&read(path)?)
            .map_err(|e| parse_error(format!("{}: {e}", path.display())))?;
        return Ok(gridfill::linalg::from_row_major(m.n1, m.n2, &m.data)?);
    }
    let records = csv_records(path)?;
    if records.is_empty() {
        bail!(parse_error(format!("{}: no rows", path.display())));
    }
    let n2 = records[0].len();
    let mut data = Vec::with_capacity(records.len() * n2);
    for (k, rec) in records.iter().enumerate() {
        if rec.len() != n2 {
            bail!(parse_error(format!(
                "{}: row {} has {} columns, expected {n2}",
                path.display(),
                k + 1,
                rec.len()
            )));
        }
        for cell in rec.iter() {
            data.push(parse_cell(cell, path, k + 1)?);
        }
    }
    Ok(gridfill::linalg::from_row_major(records.len(), n2, &data)?)
}

/// Observed (finite) entries of a matrix with NaN holes.
pub fn observed_entries(m: &Matrix) -> Vec<(Entry, f64)> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)].is_finite() {
                out.push(((i, j), m[(i, j)]));
            }
        }
    }
    out
}

pub fn read_observations(path: &Path) -> Result<Vec<(Entry, f64)>> {
    let mut out = Vec::new();
    for (k, rec) in csv_records(path)?.iter().enumerate() {
        if k == 0 && rec.get(0).is_some_and(|s| s.parse::<f64>().is_err()) {
            continue; // header
        }
        if rec.len() != 3 {
            bail!(parse_error(format!(
                "{}: row {} needs i,j,value",
                path.display(),
                k + 1
            )));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_error(format!("{}: row {}: bad index {s:?}", path.display(), k + 1)))
        };
        let value = parse_cell(&rec[2], path, k + 1)?;
        if !value.is_finite() {
            bail!(parse_error(format!("{}: row {}: value must be finite", path.display(), k + 1)));
        }
        out.push(((index(&rec[0])?, index(&rec[1])?), value));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub n1: usize,
    pub n2: usize,
    pub constraints: Vec<LinearConstraint>,
}

pub fn read_constraints(path: &Path) -> Result<ConstraintFile> {
    serde_json::from_str(&read(path)?).map_err(|e| parse_error(format!("{}: {e}", path.display())))
}

/// `# ...` lines carrying the tool version and the resolved configuration.
pub fn provenance_header(config: &serde_json::Value) -> String {
    format!(
        "# gridfill {}\n# config {}\n",
        env!("CARGO_PKG_VERSION"),
        serde_json::to_string(config).expect("config serializes")
    )
}

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

pub fn matrix_csv(m: &Matrix, header: &str) -> String {
    let mut out = header.to_string();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV with a provenance header, a column header and stringified rows.
pub fn table_csv(header: &str, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.to_string();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// JSON document `{"version", "config", "report"}`.
pub fn write_report<T: Serialize>(path: &Path, config: &serde_json::Value, report: &T) -> Result<()> {
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "report": report,
    });
    write(path, &(serde_json::to_string_pretty(&doc)? + "\n"))
}
