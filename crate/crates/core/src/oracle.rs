//! Reference machinery that shares nothing with the kernel-based solvers:
//! a closed form for single-point problems, a projected gradient method on the
//! raw objective, and finite-difference gradients.

use crate::error::{Result, UotError};
use crate::math::{exp, powf};
use crate::matrix::Matrix;
use crate::model::{objective_gradient, objective_unchecked, uot_objective, TransportPlan, UotProblem};

/// Largest `n * m` accepted by [`projected_descent_reference`].
pub const MAX_ORACLE_ENTRIES: usize = 100;

/// Entries are kept at or above this so the marginal logarithms stay finite.
pub const ORACLE_FLOOR: f64 = 1e-300;

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    ClosedForm1x1,
    ProjectedDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub plan: TransportPlan,
    pub objective: f64,
    pub method: OracleMethod,
    /// First-order stationarity actually achieved (projected gradient sup-norm).
    pub certified_tol: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl OracleResult {
    /// `Err(NotConverged)` when the requested tolerance was not reached.
    pub fn require_converged(self, tol: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(UotError::NotConverged {
                residual: self.certified_tol,
                tol,
            })
        }
    }
}

/// Unique root of `c + lambda1 log(p/a) + lambda2 log(p/b) = 0`:
/// `p* = (a^lambda1 b^lambda2)^(1/(lambda1+lambda2)) exp(-c/(lambda1+lambda2))`.
pub fn closed_form_1x1(a: f64, b: f64, c: f64, lambda1: f64, lambda2: f64) -> f64 {
    let total = lambda1 + lambda2;
    powf(a, lambda1 / total) * powf(b, lambda2 / total) * exp(-c / total)
}

/// Closed-form solution of a `1 x 1` problem.
pub fn oracle_1x1(problem: &UotProblem) -> Result<OracleResult> {
    if problem.shape() != (1, 1) {
        return Err(UotError::DimensionMismatch {
            expected: (1, 1),
            found: problem.shape(),
        });
    }
    let p = closed_form_1x1(
        problem.a()[0],
        problem.b()[0],
        problem.cost().get(0, 0),
        problem.lambda1(),
        problem.lambda2(),
    );
    let plan = TransportPlan::new(Matrix::filled(1, 1, p))?;
    let grad = objective_gradient(problem, &plan)?.get(0, 0);
    Ok(OracleResult {
        objective: uot_objective(problem, &plan)?,
        plan,
        method: OracleMethod::ClosedForm1x1,
        certified_tol: grad.abs(),
        converged: true,
        iterations: 0,
    })
}

fn projected_gradient_norm(plan: &Matrix, grad: &Matrix) -> f64 {
    let mut norm = 0.0f64;
    for (&p, &g) in plan.as_slice().iter().zip(grad.as_slice()) {
        let component = if p <= ORACLE_FLOOR { g.min(0.0) } else { g };
        norm = norm.max(component.abs());
    }
    norm
}

/// Minimizes the objective over `P >= 0` by projected gradient descent with
/// Armijo backtracking, from the all-ones plan.
///
/// Stops when the projected gradient sup-norm is at most `tol`. Running out of
/// iterations is not an error: the result reports `converged = false` and the
/// stationarity it did reach.
pub fn projected_descent_reference(
    problem: &UotProblem,
    iters: usize,
    tol: f64,
) -> Result<OracleResult> {
    let (n, m) = problem.shape();
    if n * m > MAX_ORACLE_ENTRIES {
        return Err(UotError::InvalidParameter {
            name: "problem size",
            reason: "projected descent oracle is limited to n*m <= 100",
        });
    }
    if !(tol > 0.0) {
        return Err(UotError::InvalidParameter {
            name: "tol",
            reason: "must be positive",
        });
    }

    let mut plan = Matrix::ones(n, m);
    let mut value = objective_unchecked(problem, &plan);
    let mut trial = Matrix::zeros(n, m);
    let mut pg_norm = f64::INFINITY;
    let mut done = 0;
    for it in 0..=iters {
        let grad = objective_gradient(problem, &TransportPlan::from_matrix_unchecked(plan.clone()))?;
        pg_norm = projected_gradient_norm(&plan, &grad);
        done = it;
        if pg_norm <= tol || it == iters {
            break;
        }
        let mut step = INITIAL_STEP;
        loop {
            for ((t, &p), &g) in trial
                .as_mut_slice()
                .iter_mut()
                .zip(plan.as_slice())
                .zip(grad.as_slice())
            {
                *t = (p - step * g).max(ORACLE_FLOOR);
            }
            let candidate = objective_unchecked(problem, &trial);
            let mut decrease = 0.0;
            for ((&t, &p), &g) in trial.as_slice().iter().zip(plan.as_slice()).zip(grad.as_slice()) {
                decrease += g * (t - p);
            }
            if candidate <= value + ARMIJO * decrease {
                core::mem::swap(&mut plan, &mut trial);
                value = candidate;
                break;
            }
            step *= SHRINK;
            if step < 1e-30 {
                // no representable progress along the projected arc
                return Ok(finish(problem, plan, pg_norm, tol, it));
            }
        }
    }
    Ok(finish(problem, plan, pg_norm, tol, done))
}

fn finish(problem: &UotProblem, plan: Matrix, pg_norm: f64, tol: f64, iterations: usize) -> OracleResult {
    let plan = TransportPlan::from_matrix_unchecked(plan);
    OracleResult {
        objective: objective_unchecked(problem, plan.matrix()),
        plan,
        method: OracleMethod::ProjectedDescent,
        certified_tol: pg_norm,
        converged: pg_norm <= tol,
        iterations,
    }
}

/// Default central-difference step for a plan: `1e-6` times its largest entry.
pub fn default_fd_step(plan: &TransportPlan) -> f64 {
    1e-6 * plan.matrix().max().max(f64::MIN_POSITIVE)
}

/// Central differences of the objective, one entry at a time.
pub fn finite_diff_gradient(problem: &UotProblem, plan: &TransportPlan, step: f64) -> Result<Matrix> {
    plan.matrix().ensure_shape(problem.shape())?;
    if !(step > 0.0) {
        return Err(UotError::InvalidParameter {
            name: "step",
            reason: "must be positive",
        });
    }
    if plan.matrix().as_slice().iter().any(|&p| p <= step) {
        return Err(UotError::Domain("plan entries must exceed the difference step"));
    }
    let (n, m) = problem.shape();
    let mut work = plan.matrix().clone();
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let p = work.get(i, j);
            work.set(i, j, p + step);
            let up = objective_unchecked(problem, &work);
            work.set(i, j, p - step);
            let down = objective_unchecked(problem, &work);
            work.set(i, j, p);
            out.set(i, j, (up - down) / (2.0 * step));
        }
    }
    Ok(out)
}
