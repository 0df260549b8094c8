//! Log-density kernels. The generic versions assume valid arguments and are
//! what the models differentiate through; [`checked`] wraps them for callers
//! that need domain errors.

use statrs::function::factorial::ln_factorial;

use super::real::{sum, Real};

/// `ln B(a, b)`
pub fn ln_beta<T: Real>(a: T, b: T) -> T {
    a.ln_gamma() + b.ln_gamma() - (a + b).ln_gamma()
}

/// Beta log-density from `ln p` and `ln(1 - p)`.
pub fn beta_lpdf_log<T: Real>(ln_p: T, ln_1mp: T, a: T, b: T) -> T {
    (a - 1.0) * ln_p + (b - 1.0) * ln_1mp - ln_beta(a, b)
}

pub fn beta_lpdf<T: Real>(p: T, a: T, b: T) -> T {
    beta_lpdf_log(p.ln(), p.rsub(1.0).ln(), a, b)
}

/// Dirichlet log-density from elementwise `ln p`.
pub fn dirichlet_lpdf_log<T: Real>(ln_p: &[T], conc: &[T]) -> T {
    debug_assert_eq!(ln_p.len(), conc.len());
    let kernel = sum(ln_p.iter().zip(conc).map(|(&l, &c)| (c - 1.0) * l));
    let norm = sum(conc.iter().map(|c| c.ln_gamma())) - sum(conc.iter().copied()).ln_gamma();
    kernel - norm
}

pub fn dirichlet_lpdf<T: Real>(p: &[T], conc: &[T]) -> T {
    let ln_p: Vec<T> = p.iter().map(|x| x.ln()).collect();
    dirichlet_lpdf_log(&ln_p, conc)
}

/// `ln(n! / prod t_j!)`, constant for a given count row.
pub fn multinomial_log_coef(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    ln_factorial(n) - counts.iter().map(|&t| ln_factorial(t)).sum::<f64>()
}

/// Multinomial log-mass given a precomputed coefficient; zero counts contribute
/// nothing even when the matching probability is zero.
pub fn multinomial_lpmf_log<T: Real>(counts: &[u64], ln_p: &[T], log_coef: f64) -> T {
    let kernel = sum(
        counts
            .iter()
            .zip(ln_p)
            .filter(|(&t, _)| t > 0)
            .map(|(&t, &l)| l * t as f64),
    );
    kernel + log_coef
}

pub fn multinomial_lpmf<T: Real>(counts: &[u64], p: &[T]) -> T {
    let ln_p: Vec<T> = p.iter().map(|x| x.ln()).collect();
    multinomial_lpmf_log(counts, &ln_p, multinomial_log_coef(counts))
}

/// Shrinkage prior on an effect size, expressed on `x = ln(omega)`:
/// `Beta(eps, eps)` on `u = 1 / (1 + omega)` times `|du/dx| = u (1 - u)`.
pub fn effect_size_prior_log_scale<T: Real>(x: T, eps: f64) -> T {
    let ln_u = -x.softplus();
    let ln_1mu = -(-x).softplus();
    let e = T::constant(eps);
    beta_lpdf_log(ln_u, ln_1mu, e, e) + ln_u + ln_1mu
}

pub mod checked {
    //! Argument-validating `f64` front ends for the kernels.

    use crate::error::{Error, Result};

    fn positive(name: &'static str, v: f64) -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name,
                reason: format!("{v} is not a positive finite number"),
            })
        }
    }

    pub fn beta_lpdf(p: f64, a: f64, b: f64) -> Result<f64> {
        positive("shape1", a)?;
        positive("shape2", b)?;
        if !(0.0..=1.0).contains(&p) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(super::beta_lpdf(p, a, b))
    }

    pub fn dirichlet_lpdf(p: &[f64], conc: &[f64]) -> Result<f64> {
        if p.len() != conc.len() {
            return Err(Error::Dimension {
                expected: conc.len(),
                found: p.len(),
            });
        }
        for &c in conc {
            positive("concentration", c)?;
        }
        crate::matrix::check_simplex("p", p)?;
        Ok(super::dirichlet_lpdf(p, conc))
    }

    /// Returns `-inf` for a positive count on a zero-probability category.
    pub fn multinomial_lpmf(counts: &[u64], p: &[f64]) -> Result<f64> {
        if p.len() != counts.len() {
            return Err(Error::Dimension {
                expected: counts.len(),
                found: p.len(),
            });
        }
        crate::matrix::check_simplex("probs", p)?;
        Ok(super::multinomial_lpmf(counts, p))
    }

    /// Density of the shrinkage prior on the `omega` scale:
    /// `Beta(1 / (1 + omega); eps, eps) - 2 ln(1 + omega)`.
    pub fn effect_size_prior_lpdf(omega: f64, eps: f64) -> Result<f64> {
        positive("omega", omega)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::OutOfDomain {
                value: eps,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let u = 1.0 / (1.0 + omega);
        Ok(super::beta_lpdf(u, eps, eps) - 2.0 * omega.ln_1p())
    }
}
