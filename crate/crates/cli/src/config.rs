//! Command-line surface and its validation into run configurations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use uot_core::experiments::{Spread, DEFAULT_SPARSITY_THRESHOLD, REFERENCE_BETA, REFERENCE_ITERS};
use uot_core::{AccelConfig, InnerStopRule, UotProblem};

use crate::error::{CliError, CliResult};
use crate::presets;
use crate::textfmt::{read_matrix, read_vector};

#[derive(Debug, Parser)]
#[command(name = "uot", version, about = "Unbalanced optimal transport solvers and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver and write its trace and final plan.
    Solve(SolveArgs),
    /// Compute the high-accuracy reference objective of a problem.
    Truth(TruthArgs),
    /// Run several solver configurations and tabulate their gaps to a reference.
    Compare(CompareArgs),
    /// Fraction of near-zero entries of a plan.
    Sparsity(SparsityArgs),
    /// Solve a small problem with the independent reference method.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Scaling,
    Ibpuot,
    Aibpuot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetName {
    Gaussian1d,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpreadArg {
    Variance,
    StdDev,
}

/// Where the problem comes from. Without `--preset` or files the Gaussian
/// benchmark is used.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    /// Source marginal (vector file).
    #[arg(long = "a", value_name = "FILE")]
    pub a_file: Option<PathBuf>,
    /// Target marginal (vector file).
    #[arg(long = "b", value_name = "FILE")]
    pub b_file: Option<PathBuf>,
    /// Cost matrix (matrix file).
    #[arg(long = "cost", value_name = "FILE")]
    pub cost_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    /// Seed of the random preset.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
    /// Reading of the second Gaussian parameter.
    #[arg(long, value_enum, default_value_t = SpreadArg::Variance)]
    pub spread: SpreadArg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Gaussian1d(Spread),
    Random { seed: u64, rows: usize, cols: usize },
    Files { a: PathBuf, b: PathBuf, cost: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub source: ProblemSource,
    pub lambda1: f64,
    pub lambda2: f64,
}

fn positive(name: &str, x: f64) -> CliResult<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(format!("--{name} must be positive and finite")))
    }
}

fn existing(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::config(format!("{} does not exist", path.display())))
    }
}

impl ProblemArgs {
    pub fn validate(&self) -> CliResult<ProblemSpec> {
        let lambda1 = positive("lambda1", self.lambda1)?;
        let lambda2 = positive("lambda2", self.lambda2)?;
        let files = [&self.a_file, &self.b_file, &self.cost_file];
        let given = files.iter().filter(|f| f.is_some()).count();
        let source = match (self.preset, given) {
            (Some(_), n) if n > 0 => {
                return Err(CliError::config("--preset cannot be combined with --a/--b/--cost"))
            }
            (None, 3) => ProblemSource::Files {
                a: existing(self.a_file.as_deref().unwrap())?,
                b: existing(self.b_file.as_deref().unwrap())?,
                cost: existing(self.cost_file.as_deref().unwrap())?,
            },
            (None, n) if n > 0 => {
                return Err(CliError::config("--a, --b and --cost must be given together"))
            }
            (Some(PresetName::Random), _) => {
                if self.rows == 0 || self.cols == 0 {
                    return Err(CliError::config("--rows and --cols must be positive"));
                }
                ProblemSource::Random {
                    seed: self.seed,
                    rows: self.rows,
                    cols: self.cols,
                }
            }
            (Some(PresetName::Gaussian1d), _) | (None, _) => ProblemSource::Gaussian1d(match self.spread {
                SpreadArg::Variance => Spread::Variance,
                SpreadArg::StdDev => Spread::StdDev,
            }),
        };
        Ok(ProblemSpec {
            source,
            lambda1,
            lambda2,
        })
    }
}

impl ProblemSpec {
    pub fn build(&self) -> CliResult<UotProblem> {
        let (l1, l2) = (self.lambda1, self.lambda2);
        let problem = match &self.source {
            ProblemSource::Gaussian1d(spread) => presets::gaussian1d(*spread, l1, l2)?,
            ProblemSource::Random { seed, rows, cols } => presets::random(*seed, *rows, *cols, l1, l2)?,
            ProblemSource::Files { a, b, cost } => {
                let (a, b, cost) = (read_vector(a)?, read_vector(b)?, read_matrix(cost)?);
                UotProblem::from_parts(&a, &b, cost, l1, l2)?
            }
        };
        Ok(problem)
    }
}

/// Inner stopping flags shared by the proximal solvers.
#[derive(Debug, Clone, Args)]
pub struct InnerArgs {
    /// Fixed number of scaling sweeps per outer iteration.
    #[arg(long, conflicts_with = "inner_tol")]
    pub inner_sweeps: Option<usize>,
    /// Run inner sweeps until the marginal residual is at most this.
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long, default_value_t = InnerStopRule::DEFAULT_MAX_SWEEPS, requires = "inner_tol")]
    pub inner_max_sweeps: usize,
}

impl InnerArgs {
    pub fn validate(&self) -> CliResult<InnerStopRule> {
        inner_rule(self.inner_sweeps, self.inner_tol, self.inner_max_sweeps)
    }
}

pub(crate) fn inner_rule(sweeps: Option<usize>, tol: Option<f64>, max_sweeps: usize) -> CliResult<InnerStopRule> {
    let rule = match (sweeps, tol) {
        (Some(_), Some(_)) => return Err(CliError::config("give either inner sweeps or an inner tolerance")),
        (None, Some(tol)) => InnerStopRule::MarginalResidual { tol, max_sweeps },
        (Some(l), None) => InnerStopRule::FixedSweeps(l),
        (None, None) => InnerStopRule::FixedSweeps(1),
    };
    rule.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(rule)
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub solver: SolverChoice,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Proximal weight (ibpuot, aibpuot).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Entropic weight (scaling).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Outer iterations, or sweeps for the scaling solver.
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[command(flatten)]
    pub inner: InnerArgs,
    /// Marginal residual at which the scaling solver stops early.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub t_exp: f64,
    #[arg(long)]
    pub no_tau_doubling: bool,
    /// Log-domain scaling iterations.
    #[arg(long)]
    pub stabilized: bool,
    /// Reference JSON; adds a gap column to the trace.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "trace.csv")]
    pub trace: PathBuf,
    #[arg(long = "plan-out", default_value = "plan.txt")]
    pub plan_out: PathBuf,
    /// Record wall-clock time per iteration (makes the trace non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

/// Validated parameters of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub solver: SolverChoice,
    /// `beta` for the proximal solvers, `eps` for scaling.
    pub weight: f64,
    pub iters: usize,
    pub inner: InnerStopRule,
    pub accel: AccelConfig,
    pub stabilized: bool,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub truth: Option<PathBuf>,
    pub trace_out: PathBuf,
    pub plan_out: PathBuf,
    pub timing: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn solver_config(
    solver: SolverChoice,
    beta: Option<f64>,
    eps: Option<f64>,
    iters: usize,
    inner: InnerStopRule,
    tol: Option<f64>,
    sigma: Option<f64>,
    t_exp: f64,
    tau_doubling: bool,
    stabilized: bool,
) -> CliResult<SolverConfig> {
    let weight = match (solver, beta, eps) {
        (SolverChoice::Scaling, None, Some(eps)) => positive("eps", eps)?,
        (SolverChoice::Scaling, _, _) => return Err(CliError::config("the scaling solver takes --eps and no --beta")),
        (_, Some(beta), None) => positive("beta", beta)?,
        _ => return Err(CliError::config("the proximal solvers take --beta and no --eps")),
    };
    if iters == 0 {
        return Err(CliError::config("--iters must be at least 1"));
    }
    if let Some(tol) = tol {
        positive("tol", tol)?;
        if solver != SolverChoice::Scaling {
            return Err(CliError::config("--tol applies to the scaling solver; use --inner-tol"));
        }
    }
    if stabilized && solver != SolverChoice::Scaling {
        return Err(CliError::config("--stabilized applies to the scaling solver only"));
    }
    let accel = AccelConfig {
        sigma,
        t_exp,
        tsc0: 1.0,
        tau_doubling,
    };
    accel.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(SolverConfig {
        solver,
        weight,
        iters,
        inner,
        accel,
        stabilized,
        tol,
    })
}

impl SolveArgs {
    pub fn validate(&self) -> CliResult<RunConfig> {
        let problem = self.problem.validate()?;
        let solver = solver_config(
            self.solver,
            self.beta,
            self.eps,
            self.iters,
            self.inner.validate()?,
            self.tol,
            self.sigma,
            self.t_exp,
            !self.no_tau_doubling,
            self.stabilized,
        )?;
        let truth = self.truth.as_deref().map(existing).transpose()?;
        Ok(RunConfig {
            problem,
            solver,
            truth,
            trace_out: self.trace.clone(),
            plan_out: self.plan_out.clone(),
            timing: self.timing,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TruthArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = REFERENCE_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = REFERENCE_ITERS)]
    pub iters: usize,
    #[command(flatten)]
    pub inner: InnerArgs,
    #[arg(long, default_value = "truth.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// JSON list of solver runs.
    #[arg(long)]
    pub spec: PathBuf,
    /// Reference JSON written by `truth`.
    #[arg(long)]
    pub truth: PathBuf,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "compare.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SparsityArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SPARSITY_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 200_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Where to write the oracle plan.
    #[arg(long = "plan-out")]
    pub plan_out: Option<PathBuf>,
}
