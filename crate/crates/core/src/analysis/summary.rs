use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;

/// Probabilities of the reported quantiles.
pub const QUANTILE_PROBS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// At [`QUANTILE_PROBS`].
    pub quantiles: [f64; 5],
}

impl SummaryRow {
    pub fn lower95(&self) -> f64 {
        self.quantiles[0]
    }

    pub fn upper95(&self) -> f64 {
        self.quantiles[4]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn get(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Type-7 quantile of sorted data: linear interpolation between order
/// statistics at `h = (n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_column(name: &str, x: &[f64]) -> Result<SummaryRow> {
    if x.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let n = x.len() as f64;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    // rounding can push the mean of identical values off by one ulp
    let mean = (x.iter().sum::<f64>() / n).clamp(sorted[0], sorted[sorted.len() - 1]);
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SummaryRow {
        name: name.to_string(),
        mean,
        sd,
        quantiles: QUANTILE_PROBS.map(|p| quantile(&sorted, p)),
    })
}

/// Summary of every stored scalar, chains pooled.
pub fn summarize(draws: &PosteriorDraws) -> Result<SummaryTable> {
    if draws.total_draws() == 0 {
        return Err(Error::EmptyDraws);
    }
    let rows = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| summarize_column(name, &draws.column(i)))
        .collect::<Result<_>>()?;
    Ok(SummaryTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_draws() {
        let r = summarize_column("x", &[0.3; 17]).unwrap();
        assert_eq!(r.mean, 0.3);
        assert_eq!(r.sd, 0.0);
        assert!(r.quantiles.iter().all(|&q| q == 0.3));
    }

    #[test]
    fn median_of_one_to_hundred() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = summarize_column("x", &x).unwrap();
        assert_eq!(r.quantiles[2], 50.5);
        // h = 99 * 0.025 = 2.475
        assert!((r.quantiles[0] - 3.475).abs() < 1e-12);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(summarize_column("x", &[]), Err(Error::EmptyDraws));
    }
}
