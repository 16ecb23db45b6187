//! Numeric CSV/TSV readers and writers.
//!
//! * Observation files: one observation per row, optional header row
//!   (detected when the first row does not parse as numbers).
//! * Matrix files: dense rows, no header.
//! * Support files: `i,j,value` rows with 1-based indices, optional header.
//!
//! Fields are separated by `,` or, when the first line contains a tab, by `\t`.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::covariance::{Group, ObservationMatrix};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// A parsed support entry: 0-based indices and the stored value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

fn parse_err(source: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn detect_delimiter(bytes: &[u8]) -> u8 {
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or(&[]);
    if first_line.contains(&b'\t') {
        b'\t'
    } else {
        b','
    }
}

/// Raw rows of a delimited file with their 1-based line numbers; blank lines skipped.
fn records(bytes: &[u8], source: &Path) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(detect_delimiter(bytes))
        .from_reader(bytes);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_number(field: &str, source: &Path, line: u64, col: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(source, line, format!("column {}: '{field}' is not a number", col + 1)))?;
    if !v.is_finite() {
        return Err(parse_err(source, line, format!("column {}: non-finite value '{field}'", col + 1)));
    }
    Ok(v)
}

fn looks_numeric(fields: &[String]) -> bool {
    fields.iter().all(|f| f.parse::<f64>().is_ok())
}

/// Parses a rectangular numeric table, returning it with the header if present.
fn parse_table(bytes: &[u8], source: &Path, allow_header: bool) -> Result<DMatrix<f64>> {
    let mut rows = records(bytes, source)?;
    if allow_header && rows.first().is_some_and(|(_, f)| !looks_numeric(f)) {
        rows.remove(0);
    }
    let Some((_, first)) = rows.first() else {
        return Err(parse_err(source, 1, "no numeric rows"));
    };
    let width = first.len();
    let mut values = DMatrix::zeros(rows.len(), width);
    for (r, (line, fields)) in rows.iter().enumerate() {
        if fields.len() != width {
            return Err(parse_err(
                source,
                *line,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            values[(r, c)] = parse_number(f, source, *line, c)?;
        }
    }
    Ok(values)
}

pub fn parse_observations(bytes: &[u8], source: &Path, group: Group) -> Result<ObservationMatrix> {
    let values = parse_table(bytes, source, true)?;
    if values.nrows() < 2 {
        return Err(parse_err(source, 1, format!("need at least 2 observations, found {}", values.nrows())));
    }
    ObservationMatrix::new(values, group)
}

pub fn read_observations(path: &Path, group: Group) -> Result<ObservationMatrix> {
    parse_observations(&fs::read(path)?, path, group)
}

pub fn parse_matrix(bytes: &[u8], source: &Path) -> Result<DMatrix<f64>> {
    parse_table(bytes, source, false)
}

/// Parses a square matrix and symmetrizes it.
pub fn parse_sym_matrix(bytes: &[u8], source: &Path) -> Result<SymMatrix> {
    let m = parse_matrix(bytes, source)?;
    if !m.is_square() {
        return Err(parse_err(
            source,
            1,
            format!("expected a square matrix, found {}x{}", m.nrows(), m.ncols()),
        ));
    }
    SymMatrix::from_matrix(m)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read(path)?, path)
}

pub fn read_sym_matrix(path: &Path) -> Result<SymMatrix> {
    parse_sym_matrix(&fs::read(path)?, path)
}

/// Parses `i,j[,value]` rows with 1-based indices.
pub fn parse_support(bytes: &[u8], source: &Path) -> Result<Vec<SupportEntry>> {
    let mut rows = records(bytes, source)?;
    if rows
        .first()
        .is_some_and(|(_, f)| f.first().is_some_and(|x| x.parse::<usize>().is_err()))
    {
        rows.remove(0);
    }
    let mut out = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_err(
                source,
                line,
                format!("expected 'i,j' or 'i,j,value', found {} fields", fields.len()),
            ));
        }
        let index = |k: usize| -> Result<usize> {
            let v: usize = fields[k].parse().map_err(|_| {
                parse_err(source, line, format!("column {}: '{}' is not a positive index", k + 1, fields[k]))
            })?;
            if v == 0 {
                return Err(parse_err(source, line, format!("column {}: indices are 1-based", k + 1)));
            }
            Ok(v - 1)
        };
        let row = index(0)?;
        let col = index(1)?;
        let value = if fields.len() == 3 {
            parse_number(&fields[2], source, line, 2)?
        } else {
            1.0
        };
        out.push(SupportEntry { row, col, value });
    }
    Ok(out)
}

pub fn read_support(path: &Path) -> Result<Vec<SupportEntry>> {
    parse_support(&fs::read(path)?, path)
}

/// Dense rows, no header; values in shortest round-trip form.
pub fn write_matrix<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    let mut line = String::new();
    for r in 0..m.nrows() {
        line.clear();
        for c in 0..m.ncols() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&m[(r, c)].to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Nonzero entries as `i,j,value`, 1-based, row-major.
pub fn write_support<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    writeln!(out, "i,j,value")?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v != 0.0 {
                writeln!(out, "{},{},{}", r + 1, c + 1, v)?;
            }
        }
    }
    Ok(())
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(m, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_support_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_support(m, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}
