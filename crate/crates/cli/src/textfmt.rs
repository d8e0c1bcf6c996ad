//! Plain-text matrices and vectors.
//!
//! The first line is the shape (`n m` for a matrix, `n` for a vector); the
//! entries follow in row-major order, whitespace separated, each printed with
//! 17 significant digits so that reading back yields the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use uot_core::{Matrix, TransportPlan};

use crate::error::{CliError, CliResult};

/// Scientific notation with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_string(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| format_real(x)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn vector_to_string(v: &[f64]) -> String {
    let mut out = format!("{}\n", v.len());
    for &x in v {
        let _ = writeln!(out, "{}", format_real(x));
    }
    out
}

fn parse_entries<'a>(tokens: impl Iterator<Item = &'a str>, expected: usize) -> Result<Vec<f64>, String> {
    let mut values = Vec::with_capacity(expected);
    for tok in tokens {
        let x: f64 = tok.parse().map_err(|_| format!("invalid number `{tok}`"))?;
        if !x.is_finite() {
            return Err(format!("non-finite entry `{tok}`"));
        }
        values.push(x);
    }
    if values.len() != expected {
        return Err(format!("expected {expected} entries, found {}", values.len()));
    }
    Ok(values)
}

fn parse_dim(tok: Option<&str>) -> Result<usize, String> {
    let tok = tok.ok_or("missing shape header")?;
    tok.parse().map_err(|_| format!("invalid dimension `{tok}`"))
}

pub fn parse_matrix(text: &str) -> Result<Matrix, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty input")?;
    let mut dims = header.split_whitespace();
    let rows = parse_dim(dims.next())?;
    let cols = parse_dim(dims.next())?;
    if dims.next().is_some() {
        return Err("matrix header must be `rows cols`".into());
    }
    if rows == 0 || cols == 0 {
        return Err("matrix dimensions must be positive".into());
    }
    let values = parse_entries(lines.flat_map(str::split_whitespace), rows * cols)?;
    Matrix::from_vec(rows, cols, values).map_err(|e| e.to_string())
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty input")?;
    let mut dims = header.split_whitespace();
    let len = parse_dim(dims.next())?;
    if dims.next().is_some() {
        return Err("vector header must be a single length".into());
    }
    if len == 0 {
        return Err("vector length must be positive".into());
    }
    parse_entries(lines.flat_map(str::split_whitespace), len)
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn format_error(path: &Path, msg: String) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        msg,
    }
}

pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    parse_matrix(&read_text(path)?).map_err(|msg| format_error(path, msg))
}

pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    parse_vector(&read_text(path)?).map_err(|msg| format_error(path, msg))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> CliResult<()> {
    fs::write(path, matrix_to_string(m)).map_err(|e| CliError::io(path, e))
}

pub fn write_vector(path: &Path, v: &[f64]) -> CliResult<()> {
    fs::write(path, vector_to_string(v)).map_err(|e| CliError::io(path, e))
}

pub fn read_plan(path: &Path) -> CliResult<TransportPlan> {
    let m = read_matrix(path)?;
    TransportPlan::new(m).map_err(|e| format_error(path, e.to_string()))
}

pub fn write_plan(path: &Path, plan: &TransportPlan) -> CliResult<()> {
    write_matrix(path, plan.matrix())
}
