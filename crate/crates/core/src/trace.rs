//! Per-iteration diagnostics shared by all solvers.

use alloc::vec::Vec;

use crate::digest::Fingerprint;
use crate::model::TransportPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Scaling,
    Ibpuot,
    Aibpuot,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Scaling => "scaling",
            SolverKind::Ibpuot => "ibpuot",
            SolverKind::Aibpuot => "aibpuot",
        }
    }
}

/// One row of a trace.
///
/// Record `k` describes the plan `P^k`. For the proximal solvers the inner
/// fields describe the subproblem solve that produced `P^k`; for the scaling
/// solver `k` counts sweeps and the inner fields describe sweep `k`. Record 0
/// is the starting point and carries no inner data.
///
/// For the accelerated solver, record `k + 1` holds the `theta_k` and `tsc`
/// used to build `P^{k+1}` together with `rho_{k+1}` and `delta_hat_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRecord {
    pub k: usize,
    pub objective: f64,
    pub inner_sweeps: usize,
    pub inner_residual: Option<f64>,
    pub nu_hat: Option<f64>,
    pub theta: Option<f64>,
    pub rho: Option<f64>,
    pub delta_hat: Option<f64>,
    pub tsc: Option<f64>,
    pub wall_ns: Option<u64>,
}

impl TraceRecord {
    pub fn start(objective: f64) -> Self {
        TraceRecord {
            objective,
            ..TraceRecord::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub solver: SolverKind,
    pub problem_digest: Fingerprint,
    pub records: Vec<TraceRecord>,
    /// `Some(false)` when a residual tolerance was requested and not met.
    /// `None` when the run had no tolerance to meet (fixed sweep counts).
    pub converged: Option<bool>,
}

impl SolveTrace {
    pub fn new(solver: SolverKind, problem_digest: Fingerprint) -> Self {
        SolveTrace {
            solver,
            problem_digest,
            records: Vec::new(),
            converged: None,
        }
    }

    /// Completed outer iterations (sweeps for the scaling solver).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    /// Objective after `k` iterations, or the final one if the run stopped earlier.
    pub fn objective_at(&self, k: usize) -> Option<f64> {
        self.records
            .get(k)
            .or_else(|| self.records.last())
            .map(|r| r.objective)
    }

    pub(crate) fn mark_tolerance(&mut self, met: bool) {
        self.converged = Some(self.converged.unwrap_or(true) && met);
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub plan: TransportPlan,
    pub trace: SolveTrace,
}

/// Monotonic time source for the `wall_ns` trace column.
///
/// The core has no access to a clock of its own; callers with `std` pass one in.
pub trait Clock {
    /// Nanoseconds since an arbitrary fixed origin, or `None` when untimed.
    fn now_ns(&self) -> Option<u64>;
}

/// Leaves `wall_ns` empty, which keeps traces bit-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ns(&self) -> Option<u64> {
        None
    }
}

pub(crate) struct Stopwatch<'a> {
    clock: &'a dyn Clock,
    origin: Option<u64>,
}

impl<'a> Stopwatch<'a> {
    pub(crate) fn start(clock: &'a dyn Clock) -> Self {
        Stopwatch {
            clock,
            origin: clock.now_ns(),
        }
    }

    pub(crate) fn elapsed(&self) -> Option<u64> {
        Some(self.clock.now_ns()?.saturating_sub(self.origin?))
    }
}
