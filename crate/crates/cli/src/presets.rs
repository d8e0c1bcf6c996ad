//! Built-in problem instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uot_core::experiments::{GaussianPreset, Spread};
use uot_core::{Matrix, Result, UotProblem};

/// The 100-point Gaussian benchmark with the given relaxation weights.
pub fn gaussian1d(spread: Spread, lambda1: f64, lambda2: f64) -> Result<UotProblem> {
    let preset = GaussianPreset { spread };
    UotProblem::from_parts(
        &preset.source(),
        &preset.target(),
        GaussianPreset::cost(),
        lambda1,
        lambda2,
    )
}

/// Marginals uniform in `(0.5, 1.5)` and costs uniform in `(0, 1)`, drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn random(seed: u64, rows: usize, cols: usize, lambda1: f64, lambda2: f64) -> Result<UotProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.5..1.5)).collect();
    let b: Vec<f64> = (0..cols).map(|_| rng.gen_range(0.5..1.5)).collect();
    let cost = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..1.0));
    UotProblem::from_parts(&a, &b, cost, lambda1, lambda2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uot_core::build_gaussian_preset;

    #[test]
    fn gaussian_matches_core_preset() {
        assert_eq!(gaussian1d(Spread::Variance, 1.0, 1.0).unwrap(), build_gaussian_preset());
    }

    #[test]
    fn random_is_seeded() {
        let p = random(7, 3, 4, 1.0, 1.0).unwrap();
        assert_eq!(p, random(7, 3, 4, 1.0, 1.0).unwrap());
        assert_ne!(p, random(8, 3, 4, 1.0, 1.0).unwrap());
        assert_eq!(p.shape(), (3, 4));
        assert!(p.a().iter().all(|&x| (0.5..1.5).contains(&x)));
    }
}
