#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uot_core::{Matrix, UotProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn positive_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Marginals in `(0.5, 1.5)`, cost in `(0, 1)`, unit relaxation weights.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> UotProblem {
    let a = positive_vec(rng, n, 0.5, 1.5);
    let b = positive_vec(rng, m, 0.5, 1.5);
    let c = Matrix::from_fn(n, m, |_, _| rng.gen_range(0.0..1.0));
    UotProblem::from_parts(&a, &b, c, 1.0, 1.0).unwrap()
}

/// `h(x) = sum x (log x - 1)` straight from the definition.
pub fn entropy(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| if v == 0.0 { 0.0 } else { v * (v.ln() - 1.0) })
        .sum()
}

/// `D_h(x, y) = h(x) - h(y) - <log y, x - y>`.
pub fn bregman_by_definition(x: &[f64], y: &[f64]) -> f64 {
    let inner: f64 = x.iter().zip(y).map(|(&xi, &yi)| yi.ln() * (xi - yi)).sum();
    entropy(x) - entropy(y) - inner
}

pub fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}
