//! Rank-normalised split R-hat and bulk effective sample size.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{PosteriorDraws, DIVERGENCE_FLAG_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostic {
    pub name: String,
    /// `None` with a single chain.
    pub rhat: Option<f64>,
    pub ess_bulk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub params: Vec<ParamDiagnostic>,
    pub divergences: usize,
    pub total_draws: usize,
    pub mean_accept_stat: f64,
    pub step_sizes: Vec<f64>,
    /// Set when more than a quarter of transitions diverged.
    pub flagged: bool,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.params
            .iter()
            .filter_map(|p| p.rhat)
            .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }

    pub fn min_ess(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.ess_bulk)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn divergence_fraction(&self) -> f64 {
        if self.total_draws == 0 {
            0.0
        } else {
            self.divergences as f64 / self.total_draws as f64
        }
    }
}

pub fn diagnose(draws: &PosteriorDraws) -> Diagnostics {
    let mut warnings = Vec::new();
    if draws.n_chains() < 2 {
        warnings.push("R-hat needs at least two chains; omitted".to_string());
    }
    let params = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let cols = draws.chain_columns(i);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            ParamDiagnostic {
                name: name.clone(),
                rhat: rhat(&refs),
                ess_bulk: ess_bulk(&refs),
            }
        })
        .collect();
    let total_draws = draws.total_draws();
    let divergences = draws.divergences();
    let accept: Vec<f64> = draws
        .chains
        .iter()
        .flat_map(|c| c.accept_stat.iter().copied())
        .collect();
    let mean_accept_stat = if accept.is_empty() {
        0.0
    } else {
        accept.iter().sum::<f64>() / accept.len() as f64
    };
    let flagged = total_draws > 0
        && divergences as f64 / total_draws as f64 > DIVERGENCE_FLAG_FRACTION;
    if flagged {
        warnings.push(format!(
            "{divergences} of {total_draws} transitions diverged"
        ));
    }
    Diagnostics {
        params,
        divergences,
        total_draws,
        mean_accept_stat,
        step_sizes: draws.chains.iter().map(|c| c.step_size).collect(),
        flagged,
        warnings,
    }
}

fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        if half == 0 {
            out.push(c.to_vec());
            continue;
        }
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replaces draws by normal scores of their pooled ranks (ties averaged),
/// `z = Phi^-1((r - 3/8) / (N + 1/4))`.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let all: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    let n = all.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| all[a].0.total_cmp(&all[b].0));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[order[j + 1]].0 == all[order[i]].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    for (k, &(_, c, i)) in all.iter().enumerate() {
        out[c][i] = normal.inverse_cdf((ranks[k] - 0.375) / (n as f64 + 0.25));
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = chains.iter().find_map(|c| c.first().copied());
    first.is_none_or(|f| chains.iter().all(|c| c.iter().all(|&x| x == f)))
}

fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_var(c)).collect::<Vec<_>>());
    let b_over_n = sample_var(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Maximum of the rank-normalised split R-hat and the folded one. `None`
/// for fewer than two chains.
pub fn rhat(chains: &[&[f64]]) -> Option<f64> {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 4) {
        return None;
    }
    if is_constant(chains) {
        return Some(1.0);
    }
    let s = split(chains);
    let bulk = split_rhat(&rank_normalize(&s));
    let mut pooled: Vec<f64> = s.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let med = quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = s
        .iter()
        .map(|c| c.iter().map(|x| (x - med).abs()).collect())
        .collect();
    let tail = split_rhat(&rank_normalize(&folded));
    let r = bulk.max(tail);
    Some(if r.is_nan() { 1.0 } else { r })
}

fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let h = (x.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    x[lo] + (h - lo as f64) * (x[hi] - x[lo])
}

/// Biased autocovariance at every lag, via FFT.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for z in &mut buf {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf[..n]
        .iter()
        .map(|z| z.re / (len as f64 * n as f64))
        .collect()
}

/// Geyer initial-positive-sequence ESS with the monotone correction, on
/// split chains.
fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let total = (m * n) as f64;
    if n < 4 {
        return total;
    }
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(&c[..n])).collect();
    let nf = n as f64;
    let chain_mean: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let mean_var = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&chain_mean);
    }
    if !(var_plus > 0.0) {
        return total;
    }
    let acov_at = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - acov_at(1)) / var_plus;
    rho[1] = rho_odd;
    let mut t = 1;
    while t + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - acov_at(t + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov_at(t + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t + 1] = rho_even;
    }
    let mut s = 1;
    while s + 3 <= max_t {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }
    let tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t + 1];
    let tau = tau.max(1.0 / total.log10());
    (total / tau).min(total)
}

/// Bulk effective sample size: ESS of the rank-normalised split chains,
/// capped at the number of draws.
pub fn ess_bulk(chains: &[&[f64]]) -> f64 {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    if is_constant(chains) {
        return total as f64;
    }
    ess(&rank_normalize(&split(chains)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n).map(|_| rng::standard_normal(&mut r) + shift).collect()
    }

    #[test]
    fn rank_ties_share_score() {
        let z = rank_normalize(&[vec![1.0, 2.0, 2.0, 3.0]]);
        assert_eq!(z[0][1], z[0][2]);
        assert!(z[0][0] < z[0][1] && z[0][2] < z[0][3]);
    }

    #[test]
    fn autocovariance_lag_zero_is_variance() {
        let x = normals(1, 257, 0.0);
        let a = autocovariance(&x);
        let m = mean(&x);
        let want = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64;
        assert!((a[0] - want).abs() < 1e-10);
        let lag3: f64 = (0..x.len() - 3).map(|i| (x[i] - m) * (x[i + 3] - m)).sum::<f64>()
            / x.len() as f64;
        assert!((a[3] - lag3).abs() < 1e-10);
    }

    #[test]
    fn single_chain_has_no_rhat() {
        let x = normals(2, 100, 0.0);
        assert_eq!(rhat(&[&x]), None);
    }

    #[test]
    fn ar1_ess_is_reduced() {
        let mut r = rng::stream(9, 0);
        let mut x = vec![0.0; 4000];
        for i in 1..x.len() {
            x[i] = 0.9 * x[i - 1] + rng::standard_normal(&mut r);
        }
        // tau = (1 + 0.9) / (1 - 0.9) = 19
        let e = ess_bulk(&[&x]);
        assert!(e > 4000.0 / 19.0 * 0.6 && e < 4000.0 / 19.0 * 1.6, "{e}");
    }
}
