//! JSON form of a reference solution.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uot_core::digest::Fingerprint;
use uot_core::{InnerStopRule, ReferenceSolution, SolverKind};

use crate::error::{CliError, CliResult};
use crate::textfmt::format_real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnerSpec {
    FixedSweeps { sweeps: usize },
    MarginalResidual { tol: f64, max_sweeps: usize },
}

impl From<InnerStopRule> for InnerSpec {
    fn from(rule: InnerStopRule) -> Self {
        match rule {
            InnerStopRule::FixedSweeps(sweeps) => InnerSpec::FixedSweeps { sweeps },
            InnerStopRule::MarginalResidual { tol, max_sweeps } => {
                InnerSpec::MarginalResidual { tol, max_sweeps }
            }
        }
    }
}

impl From<InnerSpec> for InnerStopRule {
    fn from(spec: InnerSpec) -> Self {
        match spec {
            InnerSpec::FixedSweeps { sweeps } => InnerStopRule::FixedSweeps(sweeps),
            InnerSpec::MarginalResidual { tol, max_sweeps } => {
                InnerStopRule::MarginalResidual { tol, max_sweeps }
            }
        }
    }
}

/// On-disk layout. The objective is a decimal string with 17 significant
/// digits so it survives any JSON number handling unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFile {
    pub objective: String,
    pub solver: String,
    pub beta: f64,
    pub iters: usize,
    pub inner: InnerSpec,
    pub problem_digest: String,
    pub plan_digest: String,
}

fn solver_from_name(name: &str) -> Option<SolverKind> {
    [SolverKind::Scaling, SolverKind::Ibpuot, SolverKind::Aibpuot]
        .into_iter()
        .find(|s| s.name() == name)
}

fn decode_digest(hex_str: &str) -> Result<Fingerprint, String> {
    let bytes = hex::decode(hex_str).map_err(|e| format!("bad digest: {e}"))?;
    bytes
        .try_into()
        .map_err(|_| "digest must be 32 bytes".to_string())
}

impl From<&ReferenceSolution> for ReferenceFile {
    fn from(r: &ReferenceSolution) -> Self {
        ReferenceFile {
            objective: format_real(r.objective),
            solver: r.solver.name().to_string(),
            beta: r.beta,
            iters: r.iters,
            inner: r.inner.into(),
            problem_digest: hex::encode(r.problem_digest),
            plan_digest: hex::encode(r.plan_digest),
        }
    }
}

impl TryFrom<ReferenceFile> for ReferenceSolution {
    type Error = String;

    fn try_from(f: ReferenceFile) -> Result<Self, String> {
        let objective: f64 = f
            .objective
            .parse()
            .map_err(|_| format!("invalid objective `{}`", f.objective))?;
        Ok(ReferenceSolution {
            objective,
            solver: solver_from_name(&f.solver).ok_or_else(|| format!("unknown solver `{}`", f.solver))?,
            beta: f.beta,
            iters: f.iters,
            inner: f.inner.into(),
            problem_digest: decode_digest(&f.problem_digest)?,
            plan_digest: decode_digest(&f.plan_digest)?,
        })
    }
}

pub fn reference_to_json(r: &ReferenceSolution) -> String {
    let mut s = serde_json::to_string_pretty(&ReferenceFile::from(r)).expect("serializable");
    s.push('\n');
    s
}

pub fn reference_from_json(text: &str) -> Result<ReferenceSolution, String> {
    let file: ReferenceFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    file.try_into()
}

pub fn write_reference(path: &Path, r: &ReferenceSolution) -> CliResult<()> {
    fs::write(path, reference_to_json(r)).map_err(|e| CliError::io(path, e))
}

pub fn read_reference(path: &Path) -> CliResult<ReferenceSolution> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    reference_from_json(&text).map_err(|msg| CliError::Format {
        path: path.to_path_buf(),
        msg,
    })
}
