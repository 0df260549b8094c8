//! Bijections from unconstrained reals to `(0, 1)` and to the open simplex,
//! with exact log-Jacobians. Both are written against [`Real`] and return
//! log-scale coordinates alongside values so downstream densities never take
//! the log of a rounded probability.

use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

/// A probability in `(0, 1)` together with `ln p` and `ln(1 - p)`.
#[derive(Debug, Clone, Copy)]
pub struct Unit<T> {
    pub p: T,
    pub ln_p: T,
    pub ln_1mp: T,
}

/// Logistic map `p = 1 / (1 + e^-x)`; returns the point and `ln p + ln(1 - p)`.
pub fn interval_transform<T: Real>(x: T) -> (Unit<T>, T) {
    let ln_p = x.log_sigmoid();
    let ln_1mp = (-x).log_sigmoid();
    let p = ln_p.exp();
    (Unit { p, ln_p, ln_1mp }, ln_p + ln_1mp)
}

pub fn interval_inverse(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok((p / (1.0 - p)).ln())
    } else {
        Err(Error::OutOfDomain {
            value: p,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// A point on the open `K`-simplex with its elementwise logs.
#[derive(Debug, Clone)]
pub struct Simplex<T> {
    pub p: Vec<T>,
    pub ln_p: Vec<T>,
}

/// Centred stick-breaking: `K - 1` reals to a `K`-simplex, with `x = 0`
/// mapping to the uniform point. Returns the simplex and its log-Jacobian.
pub fn simplex_transform<T: Real>(x: &[T]) -> (Simplex<T>, T) {
    let k = x.len() + 1;
    let mut ln_p = Vec::with_capacity(k);
    let mut ln_stick = T::zero();
    let mut log_jac = T::zero();
    for (i, &xi) in x.iter().enumerate() {
        let shifted = xi - ((k - 1 - i) as f64).ln();
        let ln_z = shifted.log_sigmoid();
        let ln_1mz = (-shifted).log_sigmoid();
        log_jac = log_jac + ln_z + ln_1mz + ln_stick;
        ln_p.push(ln_stick + ln_z);
        ln_stick = ln_stick + ln_1mz;
    }
    ln_p.push(ln_stick);
    let p = ln_p.iter().map(|&l| l.exp()).collect();
    (Simplex { p, ln_p }, log_jac)
}

pub fn simplex_inverse(p: &[f64]) -> Result<Vec<f64>> {
    let k = p.len();
    if k < 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: 0,
        });
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "simplex",
            reason: format!("sums to {s}"),
        });
    }
    if let Some(&bad) = p.iter().find(|&&v| v <= 0.0 || (v >= 1.0 && k > 1)) {
        return Err(Error::OutOfDomain {
            value: bad,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut stick = 1.0;
    let mut out = Vec::with_capacity(k - 1);
    for (i, &pi) in p[..k - 1].iter().enumerate() {
        let z = pi / stick;
        out.push((z / (1.0 - z)).ln() + ((k - 1 - i) as f64).ln());
        stick -= pi;
    }
    Ok(out)
}

/// Named slice of an unconstrained parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Flat unconstrained vector layout: every free parameter appears in exactly
/// one block.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    blocks: Vec<Block>,
    dim: usize,
}

impl Layout {
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> std::ops::Range<usize> {
        let start = self.dim;
        self.blocks.push(Block {
            name: name.into(),
            start,
            len,
        });
        self.dim += len;
        start..self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_symmetry_point() {
        let (u, lj) = interval_transform(0.0f64);
        assert_eq!(u.p, 0.5);
        assert!((lj - 0.25f64.ln()).abs() < 1e-15);
        let (u, _) = interval_transform(2.0f64);
        assert!((u.p - 0.880_797_077_977_882_3).abs() < 1e-15);
        let (u, _) = interval_transform(800.0f64);
        assert_eq!(u.p, 1.0);
        assert!(u.ln_1mp.is_finite());
    }

    #[test]
    fn interval_inverse_domain() {
        assert!(interval_inverse(0.0).is_err());
        assert!(interval_inverse(1.0).is_err());
        assert!((interval_inverse(0.880_797_077_977_882_3).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_maps_to_uniform() {
        for k in 2..7 {
            let (s, _) = simplex_transform(&vec![0.0f64; k - 1]);
            for p in &s.p {
                assert!((p - 1.0 / k as f64).abs() < 1e-15);
            }
        }
        let (s, lj) = simplex_transform::<f64>(&[]);
        assert_eq!(s.p, vec![1.0]);
        assert_eq!(lj, 0.0);
    }

    #[test]
    fn simplex_round_trip() {
        let p = [0.5, 0.3, 0.2];
        let x = simplex_inverse(&p).unwrap();
        let (s, _) = simplex_transform(&x);
        for (a, b) in s.p.iter().zip(p) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn simplex_inverse_rejects_boundary() {
        assert!(simplex_inverse(&[1.0, 0.0]).is_err());
        assert!(simplex_inverse(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn layout_is_contiguous() {
        let mut l = Layout::default();
        assert_eq!(l.push("a", 3), 0..3);
        assert_eq!(l.push("b", 0), 3..3);
        assert_eq!(l.push("c", 2), 3..5);
        assert_eq!(l.dim(), 5);
        assert_eq!(l.block("c").unwrap().start, 3);
    }
}
