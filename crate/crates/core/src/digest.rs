//! SHA-256 fingerprints used to tie traces and reference solutions to a problem.

use sha2::{Digest, Sha256};

use crate::matrix::Matrix;
use crate::model::{TransportPlan, UotProblem};

pub type Fingerprint = [u8; 32];

fn feed_matrix(hasher: &mut Sha256, m: &Matrix) {
    hasher.update((m.rows() as u64).to_le_bytes());
    hasher.update((m.cols() as u64).to_le_bytes());
    for x in m.as_slice() {
        hasher.update(x.to_bits().to_le_bytes());
    }
}

/// Digest over the exact bit patterns of `a`, `b`, `C`, `lambda1`, `lambda2`.
pub fn problem_digest(problem: &UotProblem) -> Fingerprint {
    let mut hasher = Sha256::new();
    hasher.update(b"uot-problem/v1");
    for v in [problem.a(), problem.b()] {
        hasher.update((v.len() as u64).to_le_bytes());
        for x in v {
            hasher.update(x.to_bits().to_le_bytes());
        }
    }
    feed_matrix(&mut hasher, problem.cost());
    hasher.update(problem.lambda1().to_bits().to_le_bytes());
    hasher.update(problem.lambda2().to_bits().to_le_bytes());
    hasher.finalize().into()
}

pub fn plan_digest(plan: &TransportPlan) -> Fingerprint {
    let mut hasher = Sha256::new();
    hasher.update(b"uot-plan/v1");
    feed_matrix(&mut hasher, plan.matrix());
    hasher.finalize().into()
}
