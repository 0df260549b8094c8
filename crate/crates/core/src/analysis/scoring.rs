use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval score of a central `(1 - level)` interval: width plus `2/level`
/// times the distance by which `truth` falls outside.
pub fn interval_score(lower: f64, upper: f64, truth: f64, level: f64) -> Result<f64> {
    if lower > upper {
        return Err(Error::InvertedInterval { lower, upper });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::OutOfDomain {
            value: level,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let penalty = 2.0 / level;
    let mut s = upper - lower;
    if truth < lower {
        s += penalty * (lower - truth);
    }
    if truth > upper {
        s += penalty * (truth - upper);
    }
    Ok(s)
}

/// Per-cell absolute bias and squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellErrors {
    pub abs_bias: Vec<f64>,
    pub sq_error: Vec<f64>,
}

impl CellErrors {
    pub fn mean_abs_bias(&self) -> f64 {
        mean(&self.abs_bias)
    }

    pub fn mse(&self) -> f64 {
        mean(&self.sq_error)
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

pub fn bias_and_mse(estimates: &[f64], truth: &[f64]) -> Result<CellErrors> {
    if estimates.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            found: estimates.len(),
        });
    }
    let diffs = estimates.iter().zip(truth).map(|(e, t)| e - t);
    Ok(CellErrors {
        abs_bias: diffs.clone().map(f64::abs).collect(),
        sq_error: diffs.map(|d| d * d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(interval_score(0.0, 1.0, 0.5, 0.05).unwrap(), 1.0);
        let s = interval_score(0.2, 0.4, 0.5, 0.05).unwrap();
        assert!((s - 4.2).abs() < 1e-12);
        assert_eq!(interval_score(0.2, 0.4, 0.4, 0.05).unwrap(), 0.2f64.max(0.4 - 0.2));
        assert!(interval_score(0.5, 0.4, 0.4, 0.05).is_err());
    }

    #[test]
    fn bias_hand_values() {
        let e = bias_and_mse(&[0.6], &[0.5]).unwrap();
        assert!((e.abs_bias[0] - 0.1).abs() < 1e-15);
        assert!((e.mse() - 0.01).abs() < 1e-15);
        let e = CellErrors {
            abs_bias: vec![0.1, 0.1],
            sq_error: vec![0.01, 0.03],
        };
        assert!((e.mse() - 0.02).abs() < 1e-15);
        assert!(bias_and_mse(&[0.1], &[]).is_err());
    }
}
