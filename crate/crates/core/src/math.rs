//! Thin wrappers over `libm` so the numerics read like ordinary float code.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// One term `x ln(x/y) - x + y` of the generalized KL divergence, `y > 0`,
/// with `0 ln 0 = 0`.
///
/// Near `x = y` the term is summed as a series in `d = (x - y) / y`, so it
/// stays positive and keeps its relative accuracy where the direct form
/// cancels to zero.
pub(crate) fn kl_term(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        return y;
    }
    let d = (x - y) / y;
    if d.abs() < 0.1 {
        // phi(d) = sum_{k >= 2} (-d)^k / (k (k - 1))
        let mut acc = 0.0;
        let mut power = d * d;
        for k in 2..40 {
            let term = power / (k * (k - 1)) as f64;
            acc += term;
            if term.abs() <= 1e-18 * acc.abs() {
                break;
            }
            power *= -d;
        }
        y * acc
    } else {
        x * (ln(x) - ln(y)) - x + y
    }
}

/// Max-shifted log-sum-exp; an all `-inf` input yields `-inf`.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut acc = 0.0;
    for v in values {
        acc += exp(v - max);
    }
    max + ln(acc)
}
