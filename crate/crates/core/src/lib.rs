//! Solvers for discrete unbalanced optimal transport with KL-relaxed marginals.
//!
//! The objective is
//!
//! ```text
//! f(P) = <C, P> + lambda1 * KL(P 1 | a) + lambda2 * KL(P^T 1 | b),   P >= 0
//! ```
//!
//! Three solvers are provided:
//!
//! * [`scaling`]: the entropic scaling iterations (the unbalanced analogue of
//!   Sinkhorn), in plain and log-domain form.
//! * [`ibpuot`]: inexact Bregman proximal point iterations whose subproblems are
//!   entropic problems on a substituted kernel, solved by a few scaling sweeps.
//! * [`aibpuot`]: the accelerated variant driven by an estimate sequence.
//!
//! [`oracle`] holds independent reference machinery and [`experiments`] the
//! one-dimensional Gaussian benchmark and its measurements.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![deny(rust_2018_idioms)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod aibpuot;
pub mod digest;
pub mod error;
pub mod experiments;
pub mod ibpuot;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod scaling;
pub mod trace;

mod math;

pub use aibpuot::{solve_aibpuot, AccelConfig, AccelState};
pub use error::{Result, SolveError, UotError};
pub use experiments::{build_gaussian_preset, GaussianPreset, ReferenceSolution};
pub use ibpuot::{solve_ibpuot, ProxParams};
pub use matrix::Matrix;
pub use model::{CostMatrix, DiscreteMeasure, TransportPlan, UotProblem};
pub use scaling::{solve_entropic_uot, InnerStopRule, ScalingState};
pub use trace::{Clock, NoClock, Solution, SolveTrace, SolverKind, TraceRecord};
