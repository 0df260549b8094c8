use std::ops::{Add, Div, Mul, Neg, Sub};

use statrs::function::gamma::ln_gamma;

/// Scalar arithmetic shared by plain `f64` evaluation and taped [`Var`](super::Var)s,
/// so each log-density is written once.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(x: f64) -> Self;
    fn value(self) -> f64;
    /// `c - self`
    fn rsub(self, c: f64) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn ln_gamma(self) -> Self;
    /// `ln(1 + e^x)`
    fn softplus(self) -> Self;
    fn logistic(self) -> Self;
    /// `min(self, cap)`; the derivative is zero above the cap.
    fn min_const(self, cap: f64) -> Self;

    fn log_sigmoid(self) -> Self {
        -(-self).softplus()
    }

    fn zero() -> Self {
        Self::constant(0.0)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

impl Real for f64 {
    fn constant(x: f64) -> Self {
        x
    }

    fn value(self) -> f64 {
        self
    }

    fn rsub(self, c: f64) -> Self {
        c - self
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln_gamma(self) -> Self {
        ln_gamma(self)
    }

    fn softplus(self) -> Self {
        softplus(self)
    }

    fn logistic(self) -> Self {
        log_sigmoid(self).exp()
    }

    fn min_const(self, cap: f64) -> Self {
        self.min(cap)
    }
}

/// Sum of a slice, starting from an exact zero.
pub fn sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut it = xs.into_iter();
    match it.next() {
        None => T::zero(),
        Some(first) => it.fold(first, |acc, x| acc + x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }
}
