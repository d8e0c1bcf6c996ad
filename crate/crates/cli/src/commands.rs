//! The subcommands. Each returns `Ok(())` or an error carrying its exit code.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::thread;

use serde::Deserialize;
use uot_core::digest::problem_digest;
use uot_core::experiments::{compute_reference_with, gap_trace, sparsity_ratio};
use uot_core::oracle::{oracle_1x1, projected_descent_reference};
use uot_core::scaling::solve_entropic_uot_with_clock;
use uot_core::ibpuot::solve_ibpuot_with_clock;
use uot_core::aibpuot::solve_aibpuot_with_clock;
use uot_core::{Clock, NoClock, ProxParams, ReferenceSolution, Solution, SolveError, UotError, UotProblem};

use crate::clock::StdClock;
use crate::config::{
    inner_rule, solver_config, CompareArgs, OracleArgs, RunConfig, SolverChoice, SolverConfig,
    SparsityArgs, TruthArgs,
};
use crate::error::{CliError, CliResult};
use crate::reference::{read_reference, write_reference};
use crate::textfmt::{format_real, read_plan, write_plan};
use crate::trace_csv::{write_gap_table, write_trace_csv, RunStatus};

pub fn run_solver(
    problem: &UotProblem,
    config: &SolverConfig,
    clock: &dyn Clock,
) -> Result<Solution, SolveError> {
    let trace_error = |e: UotError, kind| {
        SolveError::new(e, uot_core::SolveTrace::new(kind, problem_digest(problem)))
    };
    match config.solver {
        SolverChoice::Scaling => solve_entropic_uot_with_clock(
            problem,
            config.weight,
            config.iters,
            config.tol.unwrap_or(f64::MIN_POSITIVE),
            config.stabilized,
            clock,
        )
        .map(|mut sol| {
            if config.tol.is_none() {
                // a fixed sweep budget has no tolerance to report on
                sol.trace.converged = None;
            }
            sol
        }),
        SolverChoice::Ibpuot | SolverChoice::Aibpuot => {
            let kind = if config.solver == SolverChoice::Ibpuot {
                uot_core::SolverKind::Ibpuot
            } else {
                uot_core::SolverKind::Aibpuot
            };
            let params = ProxParams::new(config.weight, config.iters, config.inner)
                .map_err(|e| trace_error(e, kind))?;
            if config.solver == SolverChoice::Ibpuot {
                solve_ibpuot_with_clock(problem, &params, None, clock)
            } else {
                solve_aibpuot_with_clock(problem, &params, &config.accel, clock)
            }
        }
    }
}

fn check_provenance(problem: &UotProblem, reference: &ReferenceSolution) -> CliResult<()> {
    if problem_digest(problem) == reference.problem_digest {
        Ok(())
    } else {
        Err(UotError::ProvenanceMismatch.into())
    }
}

fn write_trace_file(
    path: &Path,
    sol_trace: &uot_core::SolveTrace,
    reference: Option<&ReferenceSolution>,
    status: &RunStatus,
) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = write_trace_csv(std::io::BufWriter::new(file), sol_trace, reference, status)?;
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Runs one solver; writes the trace (also on failure) and the final plan.
pub fn cmd_solve(config: &RunConfig) -> CliResult<()> {
    let problem = config.problem.build()?;
    let reference = config.truth.as_deref().map(read_reference).transpose()?;
    if let Some(r) = &reference {
        check_provenance(&problem, r)?;
    }
    let std_clock = StdClock::new();
    let clock: &dyn Clock = if config.timing { &std_clock } else { &NoClock };
    match run_solver(&problem, &config.solver, clock) {
        Ok(sol) => {
            let status = RunStatus::from_trace(&sol.trace);
            write_trace_file(&config.trace_out, &sol.trace, reference.as_ref(), &status)?;
            write_plan(&config.plan_out, &sol.plan)
        }
        Err(failure) => {
            let status = RunStatus::Failed(failure.error.to_string());
            write_trace_file(&config.trace_out, &failure.trace, reference.as_ref(), &status)?;
            Err(failure.error.into())
        }
    }
}

pub fn cmd_truth(args: &TruthArgs) -> CliResult<()> {
    let problem = args.problem.validate()?;
    if args.iters == 0 {
        return Err(CliError::config("--iters must be at least 1"));
    }
    if !(args.beta > 0.0 && args.beta.is_finite()) {
        return Err(CliError::config("--beta must be positive and finite"));
    }
    let inner = args.inner.validate()?;
    let problem = problem.build()?;
    let reference = compute_reference_with(&problem, args.beta, args.iters, inner).map_err(|e| e.error)?;
    write_reference(&args.out, &reference)
}

/// One entry of a comparison file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    pub solver: SolverChoice,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    pub iters: usize,
    #[serde(default)]
    pub inner_sweeps: Option<usize>,
    #[serde(default)]
    pub inner_tol: Option<f64>,
    #[serde(default)]
    pub inner_max_sweeps: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub t_exp: Option<f64>,
    #[serde(default)]
    pub tau_doubling: Option<bool>,
    #[serde(default)]
    pub stabilized: bool,
}

/// A comparison file: `{"runs": [RunSpec, ...]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub runs: Vec<RunSpec>,
}

impl RunSpec {
    pub fn to_config(&self) -> CliResult<SolverConfig> {
        let inner = inner_rule(
            self.inner_sweeps,
            self.inner_tol,
            self.inner_max_sweeps.unwrap_or(uot_core::InnerStopRule::DEFAULT_MAX_SWEEPS),
        )?;
        solver_config(
            self.solver,
            self.beta,
            self.eps,
            self.iters,
            inner,
            self.tol,
            self.sigma,
            self.t_exp.unwrap_or(0.5),
            self.tau_doubling.unwrap_or(true),
            self.stabilized,
        )
        .map_err(|e| CliError::config(format!("run `{}`: {e}", self.label)))
    }
}

pub fn parse_compare_spec(text: &str) -> CliResult<Vec<(String, SolverConfig)>> {
    let spec: CompareSpec =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("comparison spec: {e}")))?;
    if spec.runs.is_empty() {
        return Err(CliError::config("comparison spec lists no runs"));
    }
    let mut out: Vec<(String, SolverConfig)> = Vec::with_capacity(spec.runs.len());
    for run in &spec.runs {
        if run.label.is_empty() || run.label.contains(['\n', '\r']) {
            return Err(CliError::config("run labels must be nonempty single lines"));
        }
        if out.iter().any(|(l, _)| *l == run.label) {
            return Err(CliError::config(format!("duplicate run label `{}`", run.label)));
        }
        out.push((run.label.clone(), run.to_config()?));
    }
    Ok(out)
}

/// Runs every configuration (concurrently) and writes `solver_label,k,gap`
/// rows in the order of the spec file.
pub fn cmd_compare(args: &CompareArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::config(format!("{}: {e}", args.spec.display())))?;
    let runs = parse_compare_spec(&text)?;
    let problem = args.problem.validate()?;
    if !args.truth.is_file() {
        return Err(CliError::config(format!("{} does not exist", args.truth.display())));
    }
    let reference = read_reference(&args.truth)?;
    let problem = problem.build()?;
    check_provenance(&problem, &reference)?;

    let results: Vec<Result<Solution, SolveError>> = thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(_, config)| s.spawn(|| run_solver(&problem, config, &NoClock)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });

    let mut blocks = Vec::with_capacity(runs.len());
    let mut first_failure = None;
    for ((label, _), result) in runs.iter().zip(results) {
        let trace = match result {
            Ok(sol) => sol.trace,
            Err(failure) => {
                eprintln!("run `{label}` failed: {}", failure.error);
                first_failure.get_or_insert(failure.error);
                failure.trace
            }
        };
        blocks.push((label.clone(), gap_trace(&trace, &reference)?));
    }
    let file = fs::File::create(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let mut out = write_gap_table(std::io::BufWriter::new(file), &blocks)?;
    out.flush().map_err(|e| CliError::io(&args.out, e))?;
    match first_failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn cmd_sparsity(args: &SparsityArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if !args.plan.is_file() {
        return Err(CliError::config(format!("{} does not exist", args.plan.display())));
    }
    if !(args.threshold > 0.0) {
        return Err(CliError::config("--threshold must be positive"));
    }
    let plan = read_plan(&args.plan)?;
    let ratio = sparsity_ratio(&plan, args.threshold)?;
    writeln!(stdout, "{}", format_real(ratio)).map_err(|e| CliError::io("<stdout>", e))
}

pub fn cmd_oracle(args: &OracleArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let problem = args.problem.validate()?.build()?;
    if !(args.tol > 0.0) {
        return Err(CliError::config("--tol must be positive"));
    }
    let result = if problem.shape() == (1, 1) {
        oracle_1x1(&problem)?
    } else {
        projected_descent_reference(&problem, args.iters, args.tol)?
    };
    let report = format!(
        "method: {:?}\nobjective: {}\ncertified_tol: {}\nconverged: {}\niterations: {}\n",
        result.method,
        format_real(result.objective),
        format_real(result.certified_tol),
        result.converged,
        result.iterations,
    );
    stdout
        .write_all(report.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))?;
    if let Some(path) = &args.plan_out {
        write_plan(path, &result.plan)?;
    }
    Ok(())
}
