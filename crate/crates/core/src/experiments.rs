//! The one-dimensional Gaussian benchmark and the measurements taken on it.
//!
//! Source: the mixture `N(20, 5) + N(50, 9)`; target: `N(60, 10)`; both sampled
//! as raw densities (no renormalization) on the grid `1, 2, ..., 100`. The
//! cost is the squared grid distance divided by its maximum, so it lies in
//! `[0, 1]`, and `lambda1 = lambda2 = 1`.

use alloc::vec::Vec;

use crate::digest::{plan_digest, problem_digest, Fingerprint};
use crate::error::{Result, SolveError, UotError};
use crate::ibpuot::{solve_ibpuot, ProxParams};
use crate::math::{exp, ln, sqrt};
use crate::matrix::Matrix;
use crate::model::{TransportPlan, UotProblem};
use crate::scaling::InnerStopRule;
use crate::trace::{SolveTrace, SolverKind};

pub const GRID_LEN: usize = 100;
pub const REFERENCE_BETA: f64 = 0.005;
pub const REFERENCE_ITERS: usize = 10_000;
pub const GAP_FLOOR: f64 = 1e-16;
pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 1e-6;

/// Normal density with mean `mu` and variance `var`.
pub fn gaussian_pdf(x: f64, mu: f64, var: f64) -> f64 {
    let d = x - mu;
    exp(-d * d / (2.0 * var)) / sqrt(2.0 * core::f64::consts::PI * var)
}

/// How the second parameter of `N(mu, s)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spread {
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianPreset {
    pub spread: Spread,
}

impl GaussianPreset {
    fn var(&self, s: f64) -> f64 {
        match self.spread {
            Spread::Variance => s,
            Spread::StdDev => s * s,
        }
    }

    pub fn grid() -> impl Iterator<Item = f64> + Clone {
        (1..=GRID_LEN).map(|x| x as f64)
    }

    pub fn source(&self) -> Vec<f64> {
        Self::grid()
            .map(|x| gaussian_pdf(x, 20.0, self.var(5.0)) + gaussian_pdf(x, 50.0, self.var(9.0)))
            .collect()
    }

    pub fn target(&self) -> Vec<f64> {
        Self::grid()
            .map(|x| gaussian_pdf(x, 60.0, self.var(10.0)))
            .collect()
    }

    pub fn cost() -> Matrix {
        let span = (GRID_LEN - 1) as f64;
        let max = span * span;
        Matrix::from_fn(GRID_LEN, GRID_LEN, |i, j| {
            let d = i as f64 - j as f64;
            d * d / max
        })
    }

    pub fn build(&self) -> UotProblem {
        UotProblem::from_parts(&self.source(), &self.target(), Self::cost(), 1.0, 1.0)
            .expect("gaussian preset is a valid problem")
    }
}

/// The benchmark instance with the variance reading of the parameters.
pub fn build_gaussian_preset() -> UotProblem {
    GaussianPreset::default().build()
}

/// A high-accuracy objective value standing in for the true optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub objective: f64,
    pub solver: SolverKind,
    pub beta: f64,
    pub iters: usize,
    pub inner: InnerStopRule,
    pub problem_digest: Fingerprint,
    pub plan_digest: Fingerprint,
}

/// Reference with the default protocol: proximal iterations with
/// `beta = 0.005`, 10000 outer iterations, one inner sweep each.
pub fn compute_reference(problem: &UotProblem) -> core::result::Result<ReferenceSolution, SolveError> {
    compute_reference_with(
        problem,
        REFERENCE_BETA,
        REFERENCE_ITERS,
        InnerStopRule::FixedSweeps(1),
    )
}

pub fn compute_reference_with(
    problem: &UotProblem,
    beta: f64,
    iters: usize,
    inner: InnerStopRule,
) -> core::result::Result<ReferenceSolution, SolveError> {
    let params = ProxParams {
        beta,
        outer_iters: iters,
        inner,
        beta_schedule: None,
    };
    let sol = solve_ibpuot(problem, &params, None)?;
    Ok(ReferenceSolution {
        objective: sol.trace.final_objective().expect("trace has a start record"),
        solver: SolverKind::Ibpuot,
        beta,
        iters,
        inner,
        problem_digest: problem_digest(problem),
        plan_digest: plan_digest(&sol.plan),
    })
}

/// Raw objective gaps `f(P^k) - f*`.
pub fn raw_gaps(trace: &SolveTrace, reference: &ReferenceSolution) -> Result<Vec<(usize, f64)>> {
    if trace.problem_digest != reference.problem_digest {
        return Err(UotError::ProvenanceMismatch);
    }
    Ok(trace
        .records
        .iter()
        .map(|r| (r.k, r.objective - reference.objective))
        .collect())
}

/// Gaps floored at `1e-16` so they can go straight onto a log axis.
pub fn gap_trace(trace: &SolveTrace, reference: &ReferenceSolution) -> Result<Vec<(usize, f64)>> {
    Ok(raw_gaps(trace, reference)?
        .into_iter()
        .map(|(k, g)| (k, g.max(GAP_FLOOR)))
        .collect())
}

/// Fraction of entries below `rel_threshold * max(P)`.
pub fn sparsity_ratio(plan: &TransportPlan, rel_threshold: f64) -> Result<f64> {
    if !(rel_threshold > 0.0) {
        return Err(UotError::InvalidParameter {
            name: "rel_threshold",
            reason: "must be positive",
        });
    }
    let max = plan.matrix().max();
    if !(max > 0.0) {
        return Err(UotError::Domain("sparsity of an all-zero plan is undefined"));
    }
    let cut = rel_threshold * max;
    let entries = plan.matrix().as_slice();
    let small = entries.iter().filter(|&&p| p < cut).count();
    Ok(small as f64 / entries.len() as f64)
}

/// Least-squares slope of `log gap` against `log k` over `k` in `[lo, hi]`.
///
/// Points with a nonpositive gap are skipped; `None` if fewer than two remain.
pub fn loglog_slope(gaps: &[(usize, f64)], lo: usize, hi: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .filter(|(k, g)| *k >= lo && *k <= hi && *k > 0 && *g > 0.0)
        .map(|&(k, g)| (ln(k as f64), ln(g)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}
