//! Problem data, transport plans, and the divergences the solvers are built on.

use alloc::vec::Vec;

use crate::error::{Result, UotError};
use crate::math::{kl_term, ln};
use crate::matrix::Matrix;

/// Nonnegative mass on a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    values: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(UotError::Domain("measure must have at least one support point"));
        }
        if values.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(UotError::Domain("measure entries must be finite and nonnegative"));
        }
        if !crate::matrix::sum(&values).is_finite() {
            return Err(UotError::Domain("measure total mass must be finite"));
        }
        Ok(DiscreteMeasure { values })
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        crate::matrix::sum(&self.values)
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&x| x > 0.0)
    }
}

/// Nonnegative, finite transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Matrix);

impl CostMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries
            .as_slice()
            .iter()
            .any(|&c| !(c >= 0.0) || !c.is_finite())
        {
            return Err(UotError::Domain("cost entries must be finite and nonnegative"));
        }
        Ok(CostMatrix(entries))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// A KL-relaxed unbalanced transport instance.
///
/// Both marginals must be strictly positive; zero entries are rejected here
/// rather than clamped later.
#[derive(Debug, Clone, PartialEq)]
pub struct UotProblem {
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    cost: CostMatrix,
    lambda1: f64,
    lambda2: f64,
}

impl UotProblem {
    pub fn new(
        a: DiscreteMeasure,
        b: DiscreteMeasure,
        cost: CostMatrix,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        if !(lambda1 > 0.0) || !lambda1.is_finite() {
            return Err(UotError::InvalidParameter {
                name: "lambda1",
                reason: "must be positive and finite",
            });
        }
        if !(lambda2 > 0.0) || !lambda2.is_finite() {
            return Err(UotError::InvalidParameter {
                name: "lambda2",
                reason: "must be positive and finite",
            });
        }
        if !a.is_positive() || !b.is_positive() {
            return Err(UotError::Domain("marginals must be strictly positive"));
        }
        cost.matrix().ensure_shape((a.len(), b.len()))?;
        Ok(UotProblem {
            a,
            b,
            cost,
            lambda1,
            lambda2,
        })
    }

    /// Convenience constructor from raw slices.
    pub fn from_parts(
        a: &[f64],
        b: &[f64],
        cost: Matrix,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        Self::new(
            DiscreteMeasure::new(a.to_vec())?,
            DiscreteMeasure::new(b.to_vec())?,
            CostMatrix::new(cost)?,
            lambda1,
            lambda2,
        )
    }

    #[inline]
    pub fn a(&self) -> &[f64] {
        self.a.values()
    }

    #[inline]
    pub fn b(&self) -> &[f64] {
        self.b.values()
    }

    #[inline]
    pub fn cost(&self) -> &Matrix {
        self.cost.matrix()
    }

    #[inline]
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    #[inline]
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// `(n, m)`.
    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.a.len(), self.b.len())
    }

    /// The all-ones plan every solver starts from.
    pub fn ones_plan(&self) -> TransportPlan {
        let (n, m) = self.shape();
        TransportPlan(Matrix::ones(n, m))
    }
}

/// A nonnegative, finite `n x m` matrix of transported mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan(Matrix);

impl TransportPlan {
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries
            .as_slice()
            .iter()
            .any(|&p| !(p >= 0.0) || !p.is_finite())
        {
            return Err(UotError::Domain("plan entries must be finite and nonnegative"));
        }
        Ok(TransportPlan(entries))
    }

    /// Wraps a matrix the caller already knows to be a valid plan.
    pub(crate) fn from_matrix_unchecked(entries: Matrix) -> Self {
        debug_assert!(entries.as_slice().iter().all(|&p| p >= 0.0 && p.is_finite()));
        TransportPlan(entries)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    /// `P 1_m`.
    pub fn row_marginal(&self) -> Vec<f64> {
        self.0.row_sums()
    }

    /// `P^T 1_n`.
    pub fn col_marginal(&self) -> Vec<f64> {
        self.0.col_sums()
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(UotError::DimensionMismatch {
            expected: (y.len(), 1),
            found: (x.len(), 1),
        });
    }
    if x.iter().any(|&v| !(v >= 0.0)) {
        return Err(UotError::Domain("first argument must be nonnegative"));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(UotError::Domain("second argument must be strictly positive"));
    }
    Ok(())
}

/// Generalized Kullback-Leibler divergence `sum x log(x/y) - x + y`, with `0 log 0 = 0`.
pub fn kl_divergence(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(kl_unchecked(x, y))
}

#[inline]
pub(crate) fn kl_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        acc += kl_term(xi, yi);
    }
    acc
}

/// Entropic regularizer `h(P) = sum P_ij (log P_ij - 1)`, with `0 (log 0 - 1) = 0`.
pub fn entropy_h(plan: &TransportPlan) -> f64 {
    let mut acc = 0.0;
    for &p in plan.matrix().as_slice() {
        if p != 0.0 {
            acc += p * (ln(p) - 1.0);
        }
    }
    acc
}

/// Bregman distance generated by the entropy `h`, on flattened entries.
///
/// Entrywise it coincides with the generalized KL divergence; the matrix case
/// is the sum over all entries.
pub fn bregman_entropy(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(kl_unchecked(x, y))
}

/// Gradient of the entropy, `log x` elementwise.
pub fn entropy_gradient(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| ln(v)).collect()
}

fn check_plan(problem: &UotProblem, plan: &TransportPlan) -> Result<()> {
    plan.matrix().ensure_shape(problem.shape())
}

/// The unregularized objective `<C,P> + lambda1 KL(P1|a) + lambda2 KL(P^T1|b)`.
pub fn uot_objective(problem: &UotProblem, plan: &TransportPlan) -> Result<f64> {
    check_plan(problem, plan)?;
    Ok(objective_unchecked(problem, plan.matrix()))
}

pub(crate) fn objective_unchecked(problem: &UotProblem, plan: &Matrix) -> f64 {
    let transport = problem.cost().frobenius(plan);
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    transport
        + problem.lambda1() * kl_unchecked(&rows, problem.a())
        + problem.lambda2() * kl_unchecked(&cols, problem.b())
}

/// Analytic gradient of [`uot_objective`]:
/// `C_ij + lambda1 log((P1)_i / a_i) + lambda2 log((P^T1)_j / b_j)`.
///
/// Requires every row and column of the plan to carry positive mass.
pub fn objective_gradient(problem: &UotProblem, plan: &TransportPlan) -> Result<Matrix> {
    check_plan(problem, plan)?;
    let rows = plan.row_marginal();
    let cols = plan.col_marginal();
    if rows.iter().chain(&cols).any(|&s| !(s > 0.0)) {
        return Err(UotError::Domain(
            "gradient needs strictly positive plan marginals",
        ));
    }
    Ok(gradient_from_marginals(problem, &rows, &cols))
}

pub(crate) fn gradient_from_marginals(problem: &UotProblem, rows: &[f64], cols: &[f64]) -> Matrix {
    let row_term: Vec<f64> = rows
        .iter()
        .zip(problem.a())
        .map(|(&r, &a)| problem.lambda1() * ln(r / a))
        .collect();
    let col_term: Vec<f64> = cols
        .iter()
        .zip(problem.b())
        .map(|(&c, &b)| problem.lambda2() * ln(c / b))
        .collect();
    let cost = problem.cost();
    let (n, m) = problem.shape();
    Matrix::from_fn(n, m, |i, j| cost.get(i, j) + row_term[i] + col_term[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::{E, LN_2};

    fn one_by_one(a: f64, b: f64, c: f64, l1: f64, l2: f64) -> UotProblem {
        UotProblem::from_parts(&[a], &[b], Matrix::filled(1, 1, c), l1, l2).unwrap()
    }

    fn plan(rows: &[&[f64]]) -> TransportPlan {
        TransportPlan::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = kl_divergence(&[2.0], &[1.0]).unwrap();
        assert!((v - (2.0 * LN_2 - 1.0)).abs() < 1e-15);
        assert!((v - 0.3862944).abs() < 1e-7);
        assert_eq!(kl_divergence(&[0.0], &[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn kl_errors() {
        assert!(matches!(
            kl_divergence(&[1.0], &[1.0, 2.0]),
            Err(UotError::DimensionMismatch { .. })
        ));
        assert!(matches!(kl_divergence(&[1.0], &[0.0]), Err(UotError::Domain(_))));
        assert!(matches!(kl_divergence(&[-1.0], &[1.0]), Err(UotError::Domain(_))));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_h(&plan(&[&[1.0, 1.0], &[1.0, 1.0]])), -4.0);
        assert_eq!(entropy_h(&plan(&[&[0.0, 0.0], &[0.0, 0.0]])), 0.0);
        assert!(entropy_h(&plan(&[&[E]])).abs() < 1e-15);
    }

    #[test]
    fn bregman_examples() {
        assert_eq!(bregman_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let v = bregman_entropy(&[1.0], &[E]).unwrap();
        assert!((v - (E - 2.0)).abs() < 1e-15);
        let v = bregman_entropy(&[2.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 2.0 * LN_2).abs() < 1e-15);
        assert!((v - 1.3862944).abs() < 1e-7);
    }

    #[test]
    fn objective_examples() {
        let p = UotProblem::from_parts(
            &[0.5, 1.5],
            &[2.0, 1.0, 0.25],
            Matrix::from_fn(2, 3, |i, j| (i + j) as f64),
            0.7,
            1.3,
        )
        .unwrap();
        let f = uot_objective(&p, &TransportPlan::new(Matrix::zeros(2, 3)).unwrap()).unwrap();
        assert!((f - (0.7 * 2.0 + 1.3 * 3.25)).abs() < 1e-14);

        let p = one_by_one(1.0, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(uot_objective(&p, &plan(&[&[1.0]])).unwrap(), 0.0);

        let (c, x) = (0.3, 1.7);
        let p = one_by_one(1.0, 1.0, c, 1.0, 1.0);
        let expected = c * x + 2.0 * (x * ln(x) - x + 1.0);
        assert!((uot_objective(&p, &plan(&[&[x]])).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn problem_validation() {
        let c = Matrix::ones(1, 1);
        assert!(UotProblem::from_parts(&[0.0], &[1.0], c.clone(), 1.0, 1.0).is_err());
        assert!(UotProblem::from_parts(&[1.0], &[1.0], c.clone(), 0.0, 1.0).is_err());
        assert!(UotProblem::from_parts(&[1.0], &[1.0], c.clone(), 1.0, -1.0).is_err());
        assert!(matches!(
            UotProblem::from_parts(&[1.0, 1.0], &[1.0], c, 1.0, 1.0),
            Err(UotError::DimensionMismatch { .. })
        ));
        assert!(CostMatrix::new(Matrix::filled(1, 1, -1.0)).is_err());
        assert!(CostMatrix::new(Matrix::filled(1, 1, f64::INFINITY)).is_err());
        assert!(DiscreteMeasure::new(vec![]).is_err());
        assert!(TransportPlan::new(Matrix::filled(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn objective_rejects_wrong_shape() {
        let p = one_by_one(1.0, 1.0, 0.0, 1.0, 1.0);
        assert!(uot_objective(&p, &TransportPlan::new(Matrix::ones(2, 1)).unwrap()).is_err());
    }
}
