//! Trace tables as CSV.
//!
//! One row per trace record with the columns
//! `k,objective[,gap],inner_sweeps,inner_residual,nu_hat,theta,rho,delta_hat,wall_ns`.
//! The `gap` column is present only when a reference objective was supplied.
//! Absent values are empty fields. The table ends with a `# status: ...` line.

use std::io::Write;

use uot_core::experiments::raw_gaps;
use uot_core::{ReferenceSolution, SolveTrace};

use crate::error::{CliError, CliResult};
use crate::textfmt::format_real;

pub const STATUS_PREFIX: &str = "# status: ";

const LEADING: [&str; 2] = ["k", "objective"];
const TRAILING: [&str; 7] = [
    "inner_sweeps",
    "inner_residual",
    "nu_hat",
    "theta",
    "rho",
    "delta_hat",
    "wall_ns",
];

/// How a run ended, for the footer line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    NotConverged,
    /// Fixed iteration budget with no tolerance attached.
    Completed,
    Failed(String),
}

impl RunStatus {
    pub fn from_trace(trace: &SolveTrace) -> Self {
        match trace.converged {
            Some(true) => RunStatus::Converged,
            Some(false) => RunStatus::NotConverged,
            None => RunStatus::Completed,
        }
    }

    pub fn label(&self) -> String {
        match self {
            RunStatus::Converged => "converged".into(),
            RunStatus::NotConverged => "not_converged".into(),
            RunStatus::Completed => "completed".into(),
            RunStatus::Failed(msg) => format!("failed: {msg}"),
        }
    }

    fn parse(s: &str) -> Self {
        match s {
            "converged" => RunStatus::Converged,
            "not_converged" => RunStatus::NotConverged,
            "completed" => RunStatus::Completed,
            other => RunStatus::Failed(other.strip_prefix("failed: ").unwrap_or(other).to_string()),
        }
    }
}

/// A parsed trace row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRow {
    pub k: usize,
    pub objective: f64,
    pub gap: Option<f64>,
    pub inner_sweeps: usize,
    pub inner_residual: Option<f64>,
    pub nu_hat: Option<f64>,
    pub theta: Option<f64>,
    pub rho: Option<f64>,
    pub delta_hat: Option<f64>,
    pub wall_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub has_gap: bool,
    pub rows: Vec<TraceRow>,
    pub status: Option<RunStatus>,
}

fn header(has_gap: bool) -> Vec<&'static str> {
    let mut cols: Vec<&str> = LEADING.to_vec();
    if has_gap {
        cols.push("gap");
    }
    cols.extend(TRAILING);
    cols
}

fn opt_real(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io("<trace>", io),
        other => CliError::Format {
            path: "<trace>".into(),
            msg: format!("{other:?}"),
        },
    }
}

/// Rows of `trace` (with raw gaps `f(P^k) - f*` when `reference` is given)
/// followed by the status footer.
pub fn write_trace_csv<W: Write>(
    out: W,
    trace: &SolveTrace,
    reference: Option<&ReferenceSolution>,
    status: &RunStatus,
) -> CliResult<W> {
    let gaps = match reference {
        Some(r) => Some(raw_gaps(trace, r)?),
        None => None,
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(gaps.is_some())).map_err(csv_error)?;
    for (idx, rec) in trace.records.iter().enumerate() {
        let mut row = vec![rec.k.to_string(), format_real(rec.objective)];
        if let Some(g) = &gaps {
            row.push(format_real(g[idx].1));
        }
        row.extend([
            rec.inner_sweeps.to_string(),
            opt_real(rec.inner_residual),
            opt_real(rec.nu_hat),
            opt_real(rec.theta),
            opt_real(rec.rho),
            opt_real(rec.delta_hat),
            rec.wall_ns.map(|t| t.to_string()).unwrap_or_default(),
        ]);
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| CliError::io("<trace>", e))?;
    let mut out = w.into_inner().map_err(|e| CliError::io("<trace>", e.into_error()))?;
    writeln!(out, "{STATUS_PREFIX}{}", status.label()).map_err(|e| CliError::io("<trace>", e))?;
    Ok(out)
}

pub fn trace_csv_string(
    trace: &SolveTrace,
    reference: Option<&ReferenceSolution>,
    status: &RunStatus,
) -> CliResult<String> {
    let bytes = write_trace_csv(Vec::new(), trace, reference, status)?;
    Ok(String::from_utf8(bytes).expect("trace CSV is ASCII"))
}

fn field<T: std::str::FromStr>(raw: &str, name: &str) -> Result<Option<T>, String> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| format!("invalid value `{raw}` in column {name}"))
}

fn required<T: std::str::FromStr>(raw: &str, name: &str) -> Result<T, String> {
    field(raw, name)?.ok_or_else(|| format!("missing value in column {name}"))
}

/// Parses what [`write_trace_csv`] produces.
pub fn parse_trace_csv(text: &str) -> Result<TraceTable, String> {
    let status = text
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(STATUS_PREFIX))
        .map(RunStatus::parse);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let cols: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let has_gap = if cols == header(true) {
        true
    } else if cols == header(false) {
        false
    } else {
        return Err(format!("unexpected header {cols:?}"));
    };
    let off = usize::from(has_gap);
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| e.to_string())?;
        let get = |i: usize| r.get(i).unwrap_or("");
        rows.push(TraceRow {
            k: required(get(0), "k")?,
            objective: required(get(1), "objective")?,
            gap: if has_gap { Some(required(get(2), "gap")?) } else { None },
            inner_sweeps: required(get(2 + off), "inner_sweeps")?,
            inner_residual: field(get(3 + off), "inner_residual")?,
            nu_hat: field(get(4 + off), "nu_hat")?,
            theta: field(get(5 + off), "theta")?,
            rho: field(get(6 + off), "rho")?,
            delta_hat: field(get(7 + off), "delta_hat")?,
            wall_ns: field(get(8 + off), "wall_ns")?,
        });
    }
    Ok(TraceTable {
        has_gap,
        rows,
        status,
    })
}

/// `solver_label,k,gap` rows for several labeled gap sequences.
pub fn write_gap_table<W: Write>(out: W, blocks: &[(String, Vec<(usize, f64)>)]) -> CliResult<W> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver_label", "k", "gap"]).map_err(csv_error)?;
    for (label, gaps) in blocks {
        for &(k, g) in gaps {
            w.write_record([label.as_str(), &k.to_string(), &format_real(g)])
                .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| CliError::io("<compare>", e))?;
    w.into_inner().map_err(|e| CliError::io("<compare>", e.into_error()))
}
