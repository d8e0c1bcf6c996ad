//! Inexact Bregman proximal point iterations.
//!
//! Each outer iteration solves, approximately,
//!
//! ```text
//! P^{k+1} = argmin_P f(P) + beta * D_h(P, P^k)
//! ```
//!
//! where `D_h` is the entropic Bregman distance. Expanding `D_h` turns the
//! subproblem into an entropic problem with weight `beta` on the kernel
//! `G = exp(-C / beta) * P^k` (entrywise), which a few scaling sweeps solve.
//! The cost `C - beta log P^k` is never formed, so zero entries of `P^k` stay
//! exactly zero instead of producing infinities.
//!
//! The dual scaling `v` is carried over between outer iterations, which is what
//! keeps a single inner sweep per iteration productive.

use alloc::vec;
use alloc::vec::Vec;

use crate::digest::problem_digest;
use crate::error::{Result, SolveError, UotError};
use crate::math::ln;
use crate::matrix::Matrix;
use crate::model::{gradient_from_marginals, objective_unchecked, TransportPlan, UotProblem};
use crate::scaling::{build_kernel, check_kernel_support, InnerStopRule, ScalingState};
use crate::trace::{Clock, NoClock, Solution, SolveTrace, SolverKind, Stopwatch, TraceRecord};

/// Plan entries below this are set to zero after every outer iteration.
pub const SUPPORT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy)]
pub struct ProxParams {
    /// Proximal weight, also the entropic weight of every subproblem.
    pub beta: f64,
    pub outer_iters: usize,
    pub inner: InnerStopRule,
    /// Optional per-iteration override of `beta`; `None` keeps it constant.
    pub beta_schedule: Option<fn(usize) -> f64>,
}

impl ProxParams {
    pub fn new(beta: f64, outer_iters: usize, inner: InnerStopRule) -> Result<Self> {
        let params = ProxParams {
            beta,
            outer_iters,
            inner,
            beta_schedule: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(UotError::InvalidParameter {
                name: "beta",
                reason: "must be positive and finite",
            });
        }
        if self.outer_iters == 0 {
            return Err(UotError::InvalidParameter {
                name: "outer iterations",
                reason: "must be at least 1",
            });
        }
        self.inner.validate()
    }

    pub fn beta_at(&self, k: usize) -> f64 {
        self.beta_schedule.map_or(self.beta, |s| s(k))
    }
}

pub(crate) fn flush_below_floor(m: &mut Matrix) {
    for p in m.as_mut_slice() {
        if *p < SUPPORT_FLOOR {
            *p = 0.0;
        }
    }
}

/// Substituted kernel `G = K * P_prev` (entrywise).
///
/// Zeros of `P_prev` become zeros of `G`, so support can only shrink.
pub fn prox_kernel(p_prev: &TransportPlan, base_kernel: &Matrix) -> Result<Matrix> {
    let g = base_kernel.hadamard(p_prev.matrix())?;
    check_kernel_support(&g, "proximal kernel")?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub inner_sweeps: usize,
    /// Marginal residual after the last inner sweep.
    pub inner_residual: f64,
    /// Inexactness estimate of the subproblem solution.
    pub nu_hat: f64,
    /// Whether a residual tolerance was met; `None` for fixed sweep counts.
    pub tolerance_met: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub plan: TransportPlan,
    /// Dual scaling to warm-start the next step with.
    pub v: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

/// One outer iteration from `p_prev`, warm-started at `warm_v`.
pub fn ibpuot_step(
    problem: &UotProblem,
    p_prev: &TransportPlan,
    params: &ProxParams,
    warm_v: &[f64],
) -> Result<StepOutput> {
    params.validate()?;
    p_prev.matrix().ensure_shape(problem.shape())?;
    let kernel = build_kernel(problem.cost(), params.beta)?;
    proximal_step(problem, p_prev.matrix(), &kernel, params.beta, &params.inner, warm_v)
}

/// Approximate minimizer of `f(P) + beta D_h(P, center)` by scaling sweeps on
/// `base_kernel * center`, where `base_kernel = exp(-C / beta)`.
pub(crate) fn proximal_step(
    problem: &UotProblem,
    center: &Matrix,
    base_kernel: &Matrix,
    beta: f64,
    inner: &InnerStopRule,
    warm_v: &[f64],
) -> Result<StepOutput> {
    let g = base_kernel.hadamard(center)?;
    check_kernel_support(&g, "proximal kernel")?;
    let mut state = ScalingState::new(g, beta, warm_v.to_vec())?;
    let (a, b) = (problem.a(), problem.b());
    let (l1, l2) = (problem.lambda1(), problem.lambda2());

    let (sweeps, residual, tolerance_met) = match *inner {
        InnerStopRule::FixedSweeps(count) => {
            for _ in 0..count {
                state.sweep(a, b, l1, l2)?;
            }
            (count, state.row_residual(a, l1), None)
        }
        InnerStopRule::MarginalResidual { tol, max_sweeps } => {
            let mut done = 0;
            let mut residual;
            loop {
                state.sweep(a, b, l1, l2)?;
                done += 1;
                residual = state.row_residual(a, l1);
                if residual <= tol || done >= max_sweeps {
                    break;
                }
            }
            (done, residual, Some(residual <= tol))
        }
    };

    let mut plan = state.plan_matrix();
    if let Some(index) = plan.as_slice().iter().position(|p| !p.is_finite()) {
        return Err(UotError::NumericalOverflow {
            context: "plan",
            index,
        });
    }
    flush_below_floor(&mut plan);
    let nu_hat = separable_inexactness(problem, &plan, &state.u, &state.v, beta);
    Ok(StepOutput {
        plan: TransportPlan::from_matrix_unchecked(plan),
        v: state.v,
        diagnostics: StepDiagnostics {
            inner_sweeps: sweeps,
            inner_residual: residual,
            nu_hat,
            tolerance_met,
        },
    })
}

/// Inexactness of `p_next` as a solution of the proximal subproblem centered at
/// `p_prev`:
///
/// ```text
/// nu_hat = max(p_next) * sum_{p_next_ij > 0} | grad f(p_next)_ij + beta (log p_next_ij - log p_prev_ij) |
/// ```
///
/// It vanishes exactly when the subproblem's stationarity condition holds on
/// the support of `p_next`. The max-entry factor converts the slope residual
/// into an objective-scale slack.
pub fn inexactness_estimate(
    problem: &UotProblem,
    p_next: &TransportPlan,
    p_prev: &TransportPlan,
    beta: f64,
) -> Result<f64> {
    p_next.matrix().ensure_shape(problem.shape())?;
    p_prev.matrix().ensure_shape(problem.shape())?;
    let rows = p_next.row_marginal();
    let cols = p_next.col_marginal();
    if rows.iter().chain(&cols).any(|&s| !(s > 0.0)) {
        return Err(UotError::Domain(
            "plan must carry mass on every row and column",
        ));
    }
    let grad = gradient_from_marginals(problem, &rows, &cols);
    let mut acc = 0.0;
    for ((&pn, &pp), &g) in p_next
        .matrix()
        .as_slice()
        .iter()
        .zip(p_prev.matrix().as_slice())
        .zip(grad.as_slice())
    {
        if pn > 0.0 {
            if !(pp > 0.0) {
                return Err(UotError::Domain(
                    "support of the new plan must lie inside the previous one",
                ));
            }
            acc += (g + beta * (ln(pn) - ln(pp))).abs();
        }
    }
    Ok(acc * p_next.matrix().max())
}

/// Same quantity as [`inexactness_estimate`] for a plan `Diag(u) (K * P_prev) Diag(v)`.
///
/// On the support `log p_next - log p_prev = log u_i + log v_j - C_ij / beta`,
/// so the residual splits into a row term plus a column term and no
/// entrywise logarithms are needed.
fn separable_inexactness(
    problem: &UotProblem,
    plan: &Matrix,
    u: &[f64],
    v: &[f64],
    beta: f64,
) -> f64 {
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let row_term: Vec<f64> = (0..rows.len())
        .map(|i| problem.lambda1() * ln(rows[i] / problem.a()[i]) + beta * ln(u[i]))
        .collect();
    let col_term: Vec<f64> = (0..cols.len())
        .map(|j| problem.lambda2() * ln(cols[j] / problem.b()[j]) + beta * ln(v[j]))
        .collect();
    let mut acc = 0.0;
    for (i, &ri) in row_term.iter().enumerate() {
        for (&p, &cj) in plan.row(i).iter().zip(&col_term) {
            if p > 0.0 {
                acc += (ri + cj).abs();
            }
        }
    }
    acc * plan.max()
}

/// Runs `params.outer_iters` proximal iterations from `init` (default all-ones).
///
/// Record `k` of the trace holds `f(P^k)` and the diagnostics of the inner
/// solve that produced it. Failing to meet an inner tolerance is not an error;
/// it shows up as `trace.converged == Some(false)`.
pub fn solve_ibpuot(
    problem: &UotProblem,
    params: &ProxParams,
    init: Option<&TransportPlan>,
) -> core::result::Result<Solution, SolveError> {
    solve_ibpuot_with_clock(problem, params, init, &NoClock)
}

pub fn solve_ibpuot_with_clock(
    problem: &UotProblem,
    params: &ProxParams,
    init: Option<&TransportPlan>,
    clock: &dyn Clock,
) -> core::result::Result<Solution, SolveError> {
    let mut trace = SolveTrace::new(SolverKind::Ibpuot, problem_digest(problem));
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Err(SolveError::new(e, trace)),
            }
        };
    }
    attempt!(params.validate());
    let mut plan = match init {
        Some(p) => {
            attempt!(p.matrix().ensure_shape(problem.shape()));
            p.clone()
        }
        None => problem.ones_plan(),
    };

    let watch = Stopwatch::start(clock);
    let mut kernel = attempt!(build_kernel(problem.cost(), params.beta_at(0)));
    let mut kernel_beta = params.beta_at(0);
    let mut v = vec![1.0; problem.shape().1];
    trace.records.push(TraceRecord {
        wall_ns: watch.elapsed(),
        ..TraceRecord::start(objective_unchecked(problem, plan.matrix()))
    });

    for k in 0..params.outer_iters {
        let beta = params.beta_at(k);
        if beta != kernel_beta {
            attempt!(ProxParams { beta, ..*params }.validate());
            kernel = attempt!(build_kernel(problem.cost(), beta));
            kernel_beta = beta;
        }
        let step = attempt!(proximal_step(
            problem,
            plan.matrix(),
            &kernel,
            beta,
            &params.inner,
            &v
        ));
        plan = step.plan;
        v = step.v;
        let d = step.diagnostics;
        if let Some(met) = d.tolerance_met {
            trace.mark_tolerance(met);
        }
        trace.records.push(TraceRecord {
            k: k + 1,
            objective: objective_unchecked(problem, plan.matrix()),
            inner_sweeps: d.inner_sweeps,
            inner_residual: Some(d.inner_residual),
            nu_hat: Some(d.nu_hat),
            wall_ns: watch.elapsed(),
            ..TraceRecord::default()
        });
    }
    Ok(Solution { plan, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::uot_objective;
    use crate::oracle::closed_form_1x1;

    fn plan(rows: &[&[f64]]) -> TransportPlan {
        TransportPlan::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn one_by_one(a: f64, b: f64, c: f64) -> UotProblem {
        UotProblem::from_parts(&[a], &[b], Matrix::filled(1, 1, c), 1.0, 1.0).unwrap()
    }

    #[test]
    fn prox_kernel_examples() {
        let k = Matrix::from_rows(&[&[0.5, 0.25], &[0.125, 1.0]]).unwrap();
        assert_eq!(prox_kernel(&plan(&[&[1.0, 1.0], &[1.0, 1.0]]), &k).unwrap(), k);
        let g = prox_kernel(&plan(&[&[0.0, 1.0], &[1.0, 0.0]]), &Matrix::ones(2, 2)).unwrap();
        assert_eq!(g, Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap());
        let g = prox_kernel(&plan(&[&[2.0]]), &Matrix::filled(1, 1, 0.5)).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert!(matches!(
            prox_kernel(&plan(&[&[0.0, 0.0], &[1.0, 1.0]]), &Matrix::ones(2, 2)),
            Err(UotError::NumericalUnderflow { .. })
        ));
    }

    #[test]
    fn step_at_optimum_stays_put() {
        let p = one_by_one(1.0, 1.0, 0.0);
        let params = ProxParams::new(1.0, 1, InnerStopRule::fixed(1).unwrap()).unwrap();
        let out = ibpuot_step(&p, &p.ones_plan(), &params, &[1.0]).unwrap();
        assert_eq!(out.plan.get(0, 0), 1.0);
    }

    #[test]
    fn huge_beta_keeps_previous_plan() {
        let p = one_by_one(4.0, 1.0, 0.0);
        let params = ProxParams::new(1e8, 1, InnerStopRule::residual(1e-14).unwrap()).unwrap();
        let prev = plan(&[&[1.0]]);
        let out = ibpuot_step(&p, &prev, &params, &[1.0]).unwrap();
        assert!((out.plan.get(0, 0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn converges_to_closed_form_with_single_sweeps() {
        let p = one_by_one(4.0, 1.0, 0.0);
        let params = ProxParams::new(0.5, 200, InnerStopRule::fixed(1).unwrap()).unwrap();
        let sol = solve_ibpuot(&p, &params, None).unwrap();
        let expected = closed_form_1x1(4.0, 1.0, 0.0, 1.0, 1.0);
        assert!((expected - 2.0).abs() < 1e-15);
        assert!((sol.plan.get(0, 0) - expected).abs() < 1e-6);
        assert_eq!(sol.trace.records.len(), 201);
        assert_eq!(sol.trace.converged, None);
    }

    #[test]
    fn inexactness_vanishes_at_fixed_point() {
        let p = one_by_one(4.0, 1.0, 0.0);
        let opt = plan(&[&[2.0]]);
        assert!(inexactness_estimate(&p, &opt, &opt, 0.7).unwrap() <= 1e-12);
    }

    #[test]
    fn exact_subproblem_has_tiny_inexactness() {
        let p = UotProblem::from_parts(
            &[0.7, 1.2],
            &[0.9, 0.4, 1.1],
            Matrix::from_fn(2, 3, |i, j| 0.1 + 0.3 * (i as f64) + 0.2 * (j as f64)),
            1.0,
            1.0,
        )
        .unwrap();
        let params = ProxParams::new(0.5, 1, InnerStopRule::residual(1e-14).unwrap()).unwrap();
        let prev = p.ones_plan();
        let out = ibpuot_step(&p, &prev, &params, &[1.0; 3]).unwrap();
        let direct = inexactness_estimate(&p, &out.plan, &prev, 0.5).unwrap();
        assert!(direct <= 1e-10, "{direct}");
        assert!(out.diagnostics.nu_hat <= 1e-10);
    }

    #[test]
    fn separable_and_direct_estimates_agree() {
        let p = UotProblem::from_parts(
            &[0.7, 1.2],
            &[0.9, 0.4, 1.1],
            Matrix::from_fn(2, 3, |i, j| 0.1 + 0.3 * (i as f64) + 0.2 * (j as f64)),
            0.8,
            1.5,
        )
        .unwrap();
        let params = ProxParams::new(0.3, 1, InnerStopRule::fixed(1).unwrap()).unwrap();
        let prev = TransportPlan::new(Matrix::from_fn(2, 3, |i, j| 0.2 + 0.1 * (i * 3 + j) as f64))
            .unwrap();
        let out = ibpuot_step(&p, &prev, &params, &[1.0; 3]).unwrap();
        let direct = inexactness_estimate(&p, &out.plan, &prev, 0.3).unwrap();
        assert!(direct > 1e-3);
        assert!((direct - out.diagnostics.nu_hat).abs() <= 1e-10 * direct);
    }

    #[test]
    fn trace_objectives_match_plans() {
        let p = one_by_one(4.0, 1.0, 0.3);
        let params = ProxParams::new(0.5, 5, InnerStopRule::fixed(2).unwrap()).unwrap();
        let sol = solve_ibpuot(&p, &params, None).unwrap();
        assert_eq!(
            sol.trace.final_objective().unwrap(),
            uot_objective(&p, &sol.plan).unwrap()
        );
        assert_eq!(sol.trace.records[3].inner_sweeps, 2);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ProxParams::new(0.0, 1, InnerStopRule::FixedSweeps(1)).is_err());
        assert!(ProxParams::new(1.0, 0, InnerStopRule::FixedSweeps(1)).is_err());
        assert!(ProxParams::new(1.0, 1, InnerStopRule::FixedSweeps(0)).is_err());
    }
}
