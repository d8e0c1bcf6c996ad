//! Accelerated inexact Bregman proximal point iterations.
//!
//! The method keeps an estimate-sequence minimizer `Z^k` next to the iterate
//! `P^k`. Each outer iteration
//!
//! 1. picks `theta_k` in `(0, 1)` solving `tau beta theta^gamma = sigma rho_k (1 - theta)`,
//! 2. forms the intermediate point `Y^k = theta_k Z^k + (1 - theta_k) P^k`,
//! 3. takes an inexact proximal step centered at `Y^k` (scaling sweeps on the
//!    kernel `exp(-C/beta) * Y^k`),
//! 4. updates `Z^{k+1} = Z^k * (P^{k+1} / Y^k)^(theta_k^(1-gamma) / tau)`,
//! 5. updates `rho_{k+1} = (1 - theta_k) rho_k` and the accumulated
//!    inexactness `delta_{k+1} = (1 - theta_k) delta_k + nu_k`.
//!
//! `gamma = 1 + t` is the triangle scaling exponent and `tau` the triangle
//! scaling constant. With the entropy kernel only `gamma = 1` holds globally;
//! a larger exponent holds for `theta` bounded away from zero, and `tau` is
//! doubled whenever `tau theta^t < 1/8` to stay in that regime.

use alloc::vec;

use crate::digest::problem_digest;
use crate::error::{Result, SolveError, UotError};
use crate::ibpuot::{flush_below_floor, proximal_step, ProxParams};
use crate::math::powf;
use crate::matrix::Matrix;
use crate::model::{objective_unchecked, TransportPlan, UotProblem};
use crate::scaling::build_kernel;
use crate::trace::{Clock, NoClock, Solution, SolveTrace, SolverKind, Stopwatch, TraceRecord};

/// Threshold of the `tau`-doubling rule.
pub const TAU_DOUBLING_THRESHOLD: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelConfig {
    /// Weight of the initial Bregman term of the estimate sequence; `None` uses `beta`.
    pub sigma: Option<f64>,
    /// `t` in `gamma = 1 + t`; `0` reduces to the unaccelerated rate.
    pub t_exp: f64,
    /// Initial triangle scaling constant.
    pub tsc0: f64,
    pub tau_doubling: bool,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            sigma: None,
            t_exp: 0.5,
            tsc0: 1.0,
            tau_doubling: true,
        }
    }
}

impl AccelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(sigma) = self.sigma {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(UotError::InvalidParameter {
                    name: "sigma",
                    reason: "must be positive and finite",
                });
            }
        }
        if !(0.0..1.0).contains(&self.t_exp) {
            return Err(UotError::InvalidParameter {
                name: "t_exp",
                reason: "must lie in [0, 1)",
            });
        }
        if !(self.tsc0 > 0.0) || !self.tsc0.is_finite() {
            return Err(UotError::InvalidParameter {
                name: "tsc0",
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }
}

/// Bookkeeping carried between accelerated iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelState {
    pub z: Matrix,
    pub rho: f64,
    /// Last selected `theta`; `NaN` before the first selection.
    pub theta: f64,
    pub tsc: f64,
    pub tse: f64,
    pub sigma: f64,
    pub t_exp: f64,
    pub delta_hat: f64,
}

impl AccelState {
    pub fn new(shape: (usize, usize), config: &AccelConfig, beta: f64) -> Result<Self> {
        config.validate()?;
        Ok(AccelState {
            z: Matrix::ones(shape.0, shape.1),
            rho: 1.0,
            theta: f64::NAN,
            tsc: config.tsc0,
            tse: 1.0 + config.t_exp,
            sigma: config.sigma.unwrap_or(beta),
            t_exp: config.t_exp,
            delta_hat: 0.0,
        })
    }
}

/// Root in `(0, 1)` of `g(theta) = tsc beta theta^gamma - sigma rho (1 - theta)`.
///
/// `g` is strictly increasing with `g(0) < 0 < g(1)`, so the root is unique.
/// Safeguarded Newton: a Newton step is taken when it stays inside the current
/// bracket, otherwise the bracket is bisected.
pub fn solve_theta(tsc: f64, beta: f64, gamma: f64, sigma: f64, rho: f64) -> Result<f64> {
    for (name, value) in [("tsc", tsc), ("beta", beta), ("sigma", sigma), ("rho", rho)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(UotError::InvalidParameter {
                name,
                reason: "must be positive and finite",
            });
        }
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(UotError::InvalidParameter {
            name: "gamma",
            reason: "must be at least 1",
        });
    }
    let lead = tsc * beta;
    let rhs = sigma * rho;
    let g = |t: f64| lead * powf(t, gamma) - rhs * (1.0 - t);

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // exact for gamma = 1
    let mut theta = rhs / (lead + rhs);
    for _ in 0..200 {
        let value = g(theta);
        if value == 0.0 {
            break;
        }
        if value > 0.0 {
            hi = theta;
        } else {
            lo = theta;
        }
        let slope = lead * gamma * powf(theta, gamma - 1.0) + rhs;
        let newton = theta - value / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == theta || hi - lo <= f64::EPSILON * hi {
            break;
        }
        theta = next;
    }
    Ok(theta)
}

/// `Y = theta Z + (1 - theta) P`.
pub fn intermediate_point(z: &Matrix, p: &Matrix, theta: f64) -> Result<Matrix> {
    p.ensure_shape(z.shape())?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(UotError::InvalidParameter {
            name: "theta",
            reason: "must lie in [0, 1]",
        });
    }
    let mut y = Matrix::zeros(z.rows(), z.cols());
    for ((out, &zi), &pi) in y.as_mut_slice().iter_mut().zip(z.as_slice()).zip(p.as_slice()) {
        *out = theta * zi + (1.0 - theta) * pi;
    }
    Ok(y)
}

/// Doubles `tsc` when `tsc * theta^t < 1/8`.
pub fn update_tau(tsc: f64, theta: f64, t_exp: f64) -> f64 {
    if tsc * powf(theta, t_exp) < TAU_DOUBLING_THRESHOLD {
        2.0 * tsc
    } else {
        tsc
    }
}

/// `Z_next = Z_prev * (P_next / Y)^s` with `s = theta^(1 - gamma) / tsc`.
///
/// This is the closed-form minimizer of the updated estimate function: the
/// entropy gradient moves by `-s (log Y - log P_next)`. Entries with
/// `Y = 0` must have `Z_prev = 0` and stay zero.
pub fn update_z(
    z_prev: &Matrix,
    p_next: &Matrix,
    y: &Matrix,
    tsc: f64,
    theta: f64,
    gamma: f64,
) -> Result<Matrix> {
    p_next.ensure_shape(z_prev.shape())?;
    y.ensure_shape(z_prev.shape())?;
    let s = powf(theta, 1.0 - gamma) / tsc;
    let mut out = Matrix::zeros(z_prev.rows(), z_prev.cols());
    for (((slot, &z), &p), &yi) in out
        .as_mut_slice()
        .iter_mut()
        .zip(z_prev.as_slice())
        .zip(p_next.as_slice())
        .zip(y.as_slice())
    {
        if yi < 0.0 || (yi == 0.0 && z > 0.0) {
            return Err(UotError::Domain("intermediate point must be positive"));
        }
        *slot = if yi == 0.0 || p == 0.0 {
            0.0
        } else {
            z * powf(p / yi, s)
        };
    }
    Ok(out)
}

/// Accelerated solver; starts from `P^0 = Z^0 = 1` and `v = 1`.
///
/// Trace record `k + 1` carries `theta_k`, the `tsc` used with it, `rho_{k+1}`
/// and `delta_hat_{k+1}`; record 0 has `rho = 1` and `delta_hat = 0`.
pub fn solve_aibpuot(
    problem: &UotProblem,
    params: &ProxParams,
    accel: &AccelConfig,
) -> core::result::Result<Solution, SolveError> {
    solve_aibpuot_with_clock(problem, params, accel, &NoClock)
}

pub fn solve_aibpuot_with_clock(
    problem: &UotProblem,
    params: &ProxParams,
    accel: &AccelConfig,
    clock: &dyn Clock,
) -> core::result::Result<Solution, SolveError> {
    let mut trace = SolveTrace::new(SolverKind::Aibpuot, problem_digest(problem));
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Err(SolveError::new(e, trace)),
            }
        };
    }
    attempt!(params.validate());
    let mut state = attempt!(AccelState::new(problem.shape(), accel, params.beta_at(0)));

    let watch = Stopwatch::start(clock);
    let mut plan = problem.ones_plan();
    let mut kernel_beta = params.beta_at(0);
    let mut kernel = attempt!(build_kernel(problem.cost(), kernel_beta));
    let mut v = vec![1.0; problem.shape().1];
    trace.records.push(TraceRecord {
        rho: Some(state.rho),
        delta_hat: Some(state.delta_hat),
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
        let theta = attempt!(solve_theta(state.tsc, beta, state.tse, state.sigma, state.rho));
        let y = attempt!(intermediate_point(&state.z, plan.matrix(), theta));
        let step = attempt!(proximal_step(problem, &y, &kernel, beta, &params.inner, &v));
        let mut z = attempt!(update_z(
            &state.z,
            step.plan.matrix(),
            &y,
            state.tsc,
            theta,
            state.tse
        ));
        flush_below_floor(&mut z);

        let d = step.diagnostics;
        let tsc_used = state.tsc;
        state.z = z;
        state.theta = theta;
        state.rho *= 1.0 - theta;
        state.delta_hat = (1.0 - theta) * state.delta_hat + d.nu_hat;
        if accel.tau_doubling {
            state.tsc = update_tau(state.tsc, theta, state.t_exp);
        }
        plan = step.plan;
        v = step.v;

        if let Some(met) = d.tolerance_met {
            trace.mark_tolerance(met);
        }
        trace.records.push(TraceRecord {
            k: k + 1,
            objective: objective_unchecked(problem, plan.matrix()),
            inner_sweeps: d.inner_sweeps,
            inner_residual: Some(d.inner_residual),
            nu_hat: Some(d.nu_hat),
            theta: Some(theta),
            rho: Some(state.rho),
            delta_hat: Some(state.delta_hat),
            tsc: Some(tsc_used),
            wall_ns: watch.elapsed(),
        });
    }
    Ok(Solution {
        plan: TransportPlan::from_matrix_unchecked(plan.into_matrix()),
        trace,
    })
}
