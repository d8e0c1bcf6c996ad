//! Entropic scaling iterations for KL-relaxed transport.
//!
//! For an entropic weight `eps` and a positive kernel `K`, one sweep performs
//!
//! ```text
//! u <- (a / (K v))^(lambda1 / (lambda1 + eps))
//! v <- (b / (K^T u))^(lambda2 / (lambda2 + eps))
//! ```
//!
//! and the plan is `P = Diag(u) K Diag(v)`. The same machinery solves the
//! proximal subproblems of [`crate::ibpuot`] and [`crate::aibpuot`], which only
//! change the kernel.
//!
//! Right after the `u` update the row marginal of the plan satisfies
//! `P 1 = a * u^(-eps/lambda1)` exactly, and right after the `v` update the
//! column marginal satisfies `P^T 1 = b * v^(-eps/lambda2)`. The stopping
//! residual measures how far the row identity is from holding after a full
//! sweep; both identities hold at the fixed point.

use alloc::vec;
use alloc::vec::Vec;

use crate::digest::problem_digest;
use crate::error::{Result, SolveError, UotError};
use crate::math::{exp, ln, log_sum_exp, powf};
use crate::matrix::Matrix;
use crate::model::{objective_unchecked, TransportPlan, UotProblem};
use crate::trace::{Clock, NoClock, Solution, SolveTrace, SolverKind, Stopwatch, TraceRecord};

/// When to stop the inner scaling loop of a proximal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerStopRule {
    /// Exactly `L` sweeps per outer iteration.
    FixedSweeps(usize),
    /// Sweep until the marginal residual is at most `tol`, giving up after
    /// `max_sweeps`.
    MarginalResidual { tol: f64, max_sweeps: usize },
}

impl InnerStopRule {
    pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

    pub fn fixed(sweeps: usize) -> Result<Self> {
        let rule = InnerStopRule::FixedSweeps(sweeps);
        rule.validate()?;
        Ok(rule)
    }

    pub fn residual(tol: f64) -> Result<Self> {
        let rule = InnerStopRule::MarginalResidual {
            tol,
            max_sweeps: Self::DEFAULT_MAX_SWEEPS,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnerStopRule::FixedSweeps(0) => Err(UotError::InvalidParameter {
                name: "inner sweeps",
                reason: "must be at least 1",
            }),
            InnerStopRule::FixedSweeps(_) => Ok(()),
            InnerStopRule::MarginalResidual { tol, max_sweeps } => {
                if !(tol > 0.0) {
                    Err(UotError::InvalidParameter {
                        name: "inner tol",
                        reason: "must be positive",
                    })
                } else if max_sweeps == 0 {
                    Err(UotError::InvalidParameter {
                        name: "inner max sweeps",
                        reason: "must be at least 1",
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(UotError::InvalidParameter {
            name: "eps",
            reason: "must be positive and finite",
        });
    }
    Ok(())
}

/// Fails if any full row or column of `kernel` is zero.
pub fn check_kernel_support(kernel: &Matrix, context: &'static str) -> Result<()> {
    for i in 0..kernel.rows() {
        if kernel.row(i).iter().all(|&k| k == 0.0) {
            return Err(UotError::NumericalUnderflow { context, index: i });
        }
    }
    let cols = kernel.col_sums();
    if let Some(j) = cols.iter().position(|&s| s == 0.0) {
        return Err(UotError::NumericalUnderflow { context, index: j });
    }
    Ok(())
}

/// Gibbs kernel `exp(-C / eps)`.
///
/// Entries may underflow to zero; a row or column that vanishes entirely is
/// reported as [`UotError::NumericalUnderflow`].
pub fn build_kernel(cost: &Matrix, eps: f64) -> Result<Matrix> {
    check_eps(eps)?;
    let kernel = cost.map(|c| exp(-c / eps));
    check_kernel_support(&kernel, "kernel")?;
    Ok(kernel)
}

/// Dual scalings of the scaling iterations together with the kernel they act on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub kernel: Matrix,
    pub eps: f64,
}

fn checked_scaling(
    target: &[f64],
    products: &[f64],
    exponent: f64,
    out: &mut [f64],
    context: &'static str,
) -> Result<()> {
    for (idx, ((&t, &kx), slot)) in target.iter().zip(products).zip(out.iter_mut()).enumerate() {
        if !kx.is_finite() {
            return Err(UotError::NumericalOverflow { context, index: idx });
        }
        if kx <= 0.0 {
            return Err(UotError::NumericalUnderflow { context, index: idx });
        }
        let s = powf(t / kx, exponent);
        if s == 0.0 {
            return Err(UotError::NumericalUnderflow { context, index: idx });
        }
        if !s.is_finite() {
            return Err(UotError::NumericalOverflow { context, index: idx });
        }
        *slot = s;
    }
    Ok(())
}

impl ScalingState {
    /// Starts from `u = 1` and the given `v`.
    pub fn new(kernel: Matrix, eps: f64, v: Vec<f64>) -> Result<Self> {
        check_eps(eps)?;
        if v.len() != kernel.cols() {
            return Err(UotError::DimensionMismatch {
                expected: (kernel.cols(), 1),
                found: (v.len(), 1),
            });
        }
        if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(UotError::Domain("initial v must be positive and finite"));
        }
        Ok(ScalingState {
            u: vec![1.0; kernel.rows()],
            v,
            kernel,
            eps,
        })
    }

    /// Starts from `u = 1`, `v = 1`.
    pub fn with_unit_scalings(kernel: Matrix, eps: f64) -> Result<Self> {
        let m = kernel.cols();
        Self::new(kernel, eps, vec![1.0; m])
    }

    fn check_lengths(&self, a: &[f64], b: &[f64]) -> Result<()> {
        let (n, m) = self.kernel.shape();
        if a.len() != n || b.len() != m {
            return Err(UotError::DimensionMismatch {
                expected: (n, m),
                found: (a.len(), b.len()),
            });
        }
        Ok(())
    }

    /// Row half-step `u = (a / K v)^(lambda1 / (lambda1 + eps))`.
    pub fn update_u(&mut self, a: &[f64], lambda1: f64) -> Result<()> {
        let kv = self.kernel.mul_vec(&self.v);
        let exponent = lambda1 / (lambda1 + self.eps);
        checked_scaling(a, &kv, exponent, &mut self.u, "K v")
    }

    /// Column half-step `v = (b / K^T u)^(lambda2 / (lambda2 + eps))`.
    pub fn update_v(&mut self, b: &[f64], lambda2: f64) -> Result<()> {
        let ktu = self.kernel.mul_vec_transposed(&self.u);
        let exponent = lambda2 / (lambda2 + self.eps);
        checked_scaling(b, &ktu, exponent, &mut self.v, "K^T u")
    }

    /// One full sweep: `u` from the old `v`, then `v` from the new `u`.
    pub fn sweep(&mut self, a: &[f64], b: &[f64], lambda1: f64, lambda2: f64) -> Result<()> {
        self.check_lengths(a, b)?;
        self.update_u(a, lambda1)?;
        self.update_v(b, lambda2)
    }

    /// `|| u * (K v) - a * u^(-eps/lambda1) ||_1`, zero exactly when the row
    /// identity holds for the current `(u, v)`.
    pub fn row_residual(&self, a: &[f64], lambda1: f64) -> f64 {
        let kv = self.kernel.mul_vec(&self.v);
        let exponent = -self.eps / lambda1;
        let mut acc = 0.0;
        for ((&ui, &kvi), &ai) in self.u.iter().zip(&kv).zip(a) {
            acc += (ui * kvi - ai * powf(ui, exponent)).abs();
        }
        acc
    }

    /// `Diag(u) K Diag(v)` without validation.
    pub(crate) fn plan_matrix(&self) -> Matrix {
        let (n, m) = self.kernel.shape();
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            let ui = self.u[i];
            for ((p, &k), &vj) in out.row_mut(i).iter_mut().zip(self.kernel.row(i)).zip(&self.v) {
                *p = ui * k * vj;
            }
        }
        out
    }
}

/// Consuming form of [`ScalingState::sweep`].
pub fn scaling_sweep(
    mut state: ScalingState,
    a: &[f64],
    b: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<ScalingState> {
    state.sweep(a, b, lambda1, lambda2)?;
    Ok(state)
}

/// `P_ij = u_i K_ij v_j`.
pub fn assemble_plan(state: &ScalingState) -> Result<TransportPlan> {
    let plan = state.plan_matrix();
    if let Some(idx) = plan.as_slice().iter().position(|p| !p.is_finite()) {
        return Err(UotError::NumericalOverflow {
            context: "plan",
            index: idx,
        });
    }
    Ok(TransportPlan::from_matrix_unchecked(plan))
}

/// Log-domain counterpart of [`ScalingState`]: potentials `phi = eps log u`,
/// `psi = eps log v` against `log K = -C / eps`, with every kernel reduction
/// done by a max-shifted log-sum-exp.
#[derive(Debug, Clone)]
struct LogScaling {
    phi: Vec<f64>,
    psi: Vec<f64>,
    log_kernel: Matrix,
    eps: f64,
}

impl LogScaling {
    fn new(cost: &Matrix, eps: f64) -> Self {
        let (n, m) = cost.shape();
        LogScaling {
            phi: vec![0.0; n],
            psi: vec![0.0; m],
            log_kernel: cost.map(|c| -c / eps),
            eps,
        }
    }

    fn sweep(&mut self, a: &[f64], b: &[f64], lambda1: f64, lambda2: f64) {
        let eps = self.eps;
        let n = self.log_kernel.rows();
        let row_exp = lambda1 / (lambda1 + eps);
        for (i, (phi, &ai)) in self.phi.iter_mut().zip(a).enumerate() {
            let row = self.log_kernel.row(i);
            let lse = log_sum_exp(row.iter().zip(&self.psi).map(|(&lk, &p)| lk + p / eps));
            *phi = row_exp * eps * (ln(ai) - lse);
        }
        let col_exp = lambda2 / (lambda2 + eps);
        let (lk, phi) = (&self.log_kernel, &self.phi);
        for (j, (psi, &bj)) in self.psi.iter_mut().zip(b).enumerate() {
            let lse = log_sum_exp((0..n).map(|i| lk.get(i, j) + phi[i] / eps));
            *psi = col_exp * eps * (ln(bj) - lse);
        }
    }

    fn plan_matrix(&self) -> Matrix {
        let eps = self.eps;
        let (n, m) = self.log_kernel.shape();
        Matrix::from_fn(n, m, |i, j| {
            exp(self.log_kernel.get(i, j) + (self.phi[i] + self.psi[j]) / eps)
        })
    }

    fn row_residual(&self, plan: &Matrix, a: &[f64], lambda1: f64) -> f64 {
        let rows = plan.row_sums();
        let mut acc = 0.0;
        for ((&r, &ai), &phi) in rows.iter().zip(a).zip(&self.phi) {
            acc += (r - ai * exp(-phi / lambda1)).abs();
        }
        acc
    }
}

/// Solves the entropically regularized problem
/// `f(P) + eps * sum P_ij (log P_ij - 1)` by scaling sweeps from `v = 1`.
///
/// Stops once the marginal residual is at most `tol` or after `max_sweeps`
/// sweeps. Record `k` of the trace holds the unregularized objective of the
/// plan after `k` sweeps. In plain mode an under- or overflowing scaling is an
/// error; `stabilized` runs the same iteration on log-potentials instead.
pub fn solve_entropic_uot(
    problem: &UotProblem,
    eps: f64,
    max_sweeps: usize,
    tol: f64,
    stabilized: bool,
) -> core::result::Result<Solution, SolveError> {
    solve_entropic_uot_with_clock(problem, eps, max_sweeps, tol, stabilized, &NoClock)
}

pub fn solve_entropic_uot_with_clock(
    problem: &UotProblem,
    eps: f64,
    max_sweeps: usize,
    tol: f64,
    stabilized: bool,
    clock: &dyn Clock,
) -> core::result::Result<Solution, SolveError> {
    let mut trace = SolveTrace::new(SolverKind::Scaling, problem_digest(problem));
    let fail = |e: UotError, trace: &SolveTrace| SolveError::new(e, trace.clone());
    if let Err(e) = check_eps(eps) {
        return Err(fail(e, &trace));
    }
    if max_sweeps == 0 {
        return Err(fail(
            UotError::InvalidParameter {
                name: "max sweeps",
                reason: "must be at least 1",
            },
            &trace,
        ));
    }
    if !(tol > 0.0) {
        return Err(fail(
            UotError::InvalidParameter {
                name: "tol",
                reason: "must be positive",
            },
            &trace,
        ));
    }

    let watch = Stopwatch::start(clock);
    let (a, b) = (problem.a(), problem.b());
    let (l1, l2) = (problem.lambda1(), problem.lambda2());

    if stabilized {
        let mut state = LogScaling::new(problem.cost(), eps);
        let mut plan = state.plan_matrix();
        trace.records.push(TraceRecord {
            wall_ns: watch.elapsed(),
            ..TraceRecord::start(objective_unchecked(problem, &plan))
        });
        let mut residual = f64::INFINITY;
        for k in 1..=max_sweeps {
            state.sweep(a, b, l1, l2);
            plan = state.plan_matrix();
            residual = state.row_residual(&plan, a, l1);
            trace.records.push(TraceRecord {
                k,
                objective: objective_unchecked(problem, &plan),
                inner_sweeps: 1,
                inner_residual: Some(residual),
                wall_ns: watch.elapsed(),
                ..TraceRecord::default()
            });
            if residual <= tol {
                break;
            }
        }
        trace.mark_tolerance(residual <= tol);
        return Ok(Solution {
            plan: TransportPlan::from_matrix_unchecked(plan),
            trace,
        });
    }

    let kernel = match build_kernel(problem.cost(), eps) {
        Ok(k) => k,
        Err(e) => return Err(fail(e, &trace)),
    };
    let mut state = match ScalingState::with_unit_scalings(kernel, eps) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, &trace)),
    };
    let mut plan = match assemble_plan(&state) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, &trace)),
    };
    trace.records.push(TraceRecord {
        wall_ns: watch.elapsed(),
        ..TraceRecord::start(objective_unchecked(problem, plan.matrix()))
    });
    let mut residual = f64::INFINITY;
    for k in 1..=max_sweeps {
        if let Err(e) = state.sweep(a, b, l1, l2) {
            return Err(fail(e, &trace));
        }
        plan = match assemble_plan(&state) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, &trace)),
        };
        residual = state.row_residual(a, l1);
        trace.records.push(TraceRecord {
            k,
            objective: objective_unchecked(problem, plan.matrix()),
            inner_sweeps: 1,
            inner_residual: Some(residual),
            wall_ns: watch.elapsed(),
            ..TraceRecord::default()
        });
        if residual <= tol {
            break;
        }
    }
    trace.mark_tolerance(residual <= tol);
    Ok(Solution { plan, trace })
}
