//! Floating-point scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the numerics are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the two supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Plain Euclidean dot product.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Accumulates `sum exp(l_i)` without overflow or underflow.
///
/// Carleman weights such as `exp(-2 s alpha)` fall far below the smallest
/// normal float on realistic grids, so weighted integrals are summed in
/// log space and only exponentiated for ratios.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `exp(log_term)`. `-inf` (a zero term) is ignored.
    pub fn add_log(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.scaled += (log_term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    /// Adds `weight * exp(log_scale)` for a non-negative `weight`.
    pub fn add(&mut self, log_scale: f64, weight: f64) {
        debug_assert!(weight >= 0.0);
        if weight > 0.0 {
            self.add_log(log_scale + weight.ln());
        }
    }

    pub fn merge(&mut self, other: &LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        self.add_log(other.max + other.scaled.ln());
    }

    /// Natural log of the accumulated sum (`-inf` when empty).
    pub fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    /// The sum itself; may underflow to zero.
    pub fn value(&self) -> f64 {
        self.ln().exp()
    }

    pub fn is_zero(&self) -> bool {
        self.max == f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsum_matches_direct_sum() {
        let terms = [1.0e-3f64, 2.5, 7.0, 0.0, 1e-12];
        let mut acc = LogSum::new();
        for t in terms {
            acc.add(0.0, t);
        }
        let direct: f64 = terms.iter().sum();
        assert!((acc.value() - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn logsum_survives_underflow() {
        let mut acc = LogSum::new();
        acc.add_log(-1000.0);
        acc.add_log(-1000.0);
        assert!((acc.ln() - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(acc.value(), 0.0);
        let mut other = LogSum::new();
        other.add_log(-999.0);
        acc.merge(&other);
        let expect = (-1000.0f64 + (2.0 + 1f64.exp()).ln()).max(-1e9);
        assert!((acc.ln() - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_logsum_is_zero() {
        let acc = LogSum::new();
        assert!(acc.is_zero());
        assert_eq!(acc.value(), 0.0);
    }
}
