//! WAIC and Pareto-smoothed importance-sampling LOO on the deviance scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape estimates above this make the LOO term unreliable.
pub const PARETO_K_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    /// Standard error of `waic`.
    pub se: f64,
    pub pointwise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loo {
    pub loo_ic: f64,
    pub elpd_loo: f64,
    pub p_loo: f64,
    /// Standard error of `loo_ic`.
    pub se: f64,
    pub pointwise_elpd: Vec<f64>,
    pub pareto_k: Vec<f64>,
    /// Observations with `k > 0.7`.
    pub high_k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMetrics {
    pub waic: Waic,
    pub loo: Loo,
}

fn log_sum_exp(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = x.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn sample_var(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = x.clone().count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mut it = x.clone();
    let first = it.next();
    if it.all(|v| Some(v) == first) {
        return 0.0;
    }
    let m = x.clone().sum::<f64>() / n;
    x.map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
}

fn se_of_total(pointwise: &[f64]) -> f64 {
    (pointwise.len() as f64 * sample_var(pointwise.iter().copied())).sqrt()
}

/// Validates a `[draw][obs]` matrix and returns `(draws, obs)`.
fn shape(loglik: &[Vec<f64>]) -> Result<(usize, usize)> {
    let s = loglik.len();
    if s == 0 {
        return Err(Error::EmptyDraws);
    }
    let n = loglik[0].len();
    for (d, row) in loglik.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: row.len(),
            });
        }
        if let Some(obs) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogLik { draw: d, obs });
        }
    }
    Ok((s, n))
}

/// `-2 (lppd - p_waic)` with `p_waic` the summed per-observation variance of
/// the log-likelihood over draws.
pub fn waic(loglik: &[Vec<f64>]) -> Result<Waic> {
    let (s, n) = shape(loglik)?;
    let ln_s = (s as f64).ln();
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut pointwise = Vec::with_capacity(n);
    for i in 0..n {
        let col = loglik.iter().map(|row| row[i]);
        let l = log_sum_exp(col.clone()) - ln_s;
        let p = sample_var(col);
        lppd += l;
        p_waic += p;
        pointwise.push(-2.0 * (l - p));
    }
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
        se: se_of_total(&pointwise),
        pointwise,
    })
}

/// Generalised Pareto fit to positive exceedances `x` (sorted ascending) by
/// the profile-posterior method, with the shape shrunk towards 0.5 as if by
/// ten prior observations. Returns `(k, sigma)`.
pub fn gpd_fit(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let nf = n as f64;
    let prior = 3.0;
    let m = 30 + (nf.sqrt() as usize);
    let x_star = x[((nf / 4.0 + 0.5).floor() as usize).max(1) - 1];
    let x_max = x[n - 1];
    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / x_star)
        .collect();
    let profile = |t: f64| {
        let b = -t;
        let k = x.iter().map(|&v| (b * v).ln_1p()).sum::<f64>() / nf;
        nf * ((b / k).ln() - k - 1.0)
    };
    let l: Vec<f64> = theta.iter().map(|&t| profile(t)).collect();
    let norm = log_sum_exp(l.iter().copied());
    let theta_hat: f64 = theta
        .iter()
        .zip(&l)
        .map(|(t, li)| t * (li - norm).exp())
        .sum();
    let k = x.iter().map(|&v| (-theta_hat * v).ln_1p()).sum::<f64>() / nf;
    let sigma = -k / theta_hat;
    let k = (k * nf + 0.5 * 10.0) / (nf + 10.0);
    (k, sigma)
}

fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-12 {
        -sigma * (-p).ln_1p()
    } else {
        sigma * (-k * (-p).ln_1p()).exp_m1() / k
    }
}

/// Pareto-smooths log importance weights in place: the largest
/// `max(ceil(0.2 S), 5)` are replaced by expected order statistics of a
/// fitted generalised Pareto, and all are truncated at the raw maximum.
/// Returns the shape estimate `k`.
pub fn psis_smooth(log_w: &mut [f64]) -> f64 {
    let s = log_w.len();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for w in log_w.iter_mut() {
        *w -= max;
    }
    let tail_len = ((0.2 * s as f64).ceil() as usize).max(5).min(s.saturating_sub(1));
    if tail_len < 5 {
        return f64::INFINITY;
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| log_w[a].total_cmp(&log_w[b]));
    let cutoff = log_w[order[s - tail_len - 1]];
    let tail = &order[s - tail_len..];
    let exp_cutoff = cutoff.exp();
    let exceed: Vec<f64> = tail.iter().map(|&i| log_w[i].exp() - exp_cutoff).collect();
    if exceed.iter().all(|&e| e <= 0.0) || exceed[tail_len - 1] == exceed[0] {
        return 0.0;
    }
    let (k, sigma) = gpd_fit(&exceed);
    if !k.is_finite() {
        return f64::INFINITY;
    }
    for (r, &i) in tail.iter().enumerate() {
        let p = (r as f64 + 0.5) / tail_len as f64;
        log_w[i] = (gpd_quantile(p, k, sigma) + exp_cutoff).ln();
    }
    for w in log_w.iter_mut() {
        *w = w.min(0.0);
    }
    k
}

/// PSIS-LOO information criterion `-2 elpd_loo` with Pareto shapes per
/// observation.
pub fn loo_ic(loglik: &[Vec<f64>]) -> Result<Loo> {
    let (s, n) = shape(loglik)?;
    let ln_s = (s as f64).ln();
    let mut pointwise_elpd = Vec::with_capacity(n);
    let mut pareto_k = Vec::with_capacity(n);
    let mut lppd = 0.0;
    for i in 0..n {
        let ll: Vec<f64> = loglik.iter().map(|row| row[i]).collect();
        lppd += log_sum_exp(ll.iter().copied()) - ln_s;
        let mut lw: Vec<f64> = ll.iter().map(|v| -v).collect();
        let k = psis_smooth(&mut lw);
        let num = log_sum_exp(lw.iter().zip(&ll).map(|(w, l)| w + l));
        let den = log_sum_exp(lw.iter().copied());
        pointwise_elpd.push(num - den);
        pareto_k.push(k);
    }
    let elpd_loo: f64 = pointwise_elpd.iter().sum();
    let deviance: Vec<f64> = pointwise_elpd.iter().map(|e| -2.0 * e).collect();
    let high_k = pareto_k
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > PARETO_K_THRESHOLD)
        .map(|(i, _)| i)
        .collect();
    Ok(Loo {
        loo_ic: -2.0 * elpd_loo,
        elpd_loo,
        p_loo: lppd - elpd_loo,
        se: se_of_total(&deviance),
        pointwise_elpd,
        pareto_k,
        high_k,
    })
}

pub fn compare(loglik: &[Vec<f64>]) -> Result<ComparisonMetrics> {
    Ok(ComparisonMetrics {
        waic: waic(loglik)?,
        loo: loo_ic(loglik)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_variance_waic() {
        let ll = vec![vec![-1.0, -2.5]; 10];
        let w = waic(&ll).unwrap();
        assert_eq!(w.p_waic, 0.0);
        assert!((w.waic - 7.0).abs() < 1e-12);
    }

    #[test]
    fn two_draw_mixture() {
        let ll = vec![vec![0.5f64.ln()], vec![0.25f64.ln()]];
        let w = waic(&ll).unwrap();
        assert!((w.lppd - 0.375f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let ll = vec![vec![0.0], vec![f64::NEG_INFINITY]];
        assert_eq!(waic(&ll), Err(Error::NonFiniteLogLik { draw: 1, obs: 0 }));
        assert!(loo_ic(&[]).is_err());
    }

    #[test]
    fn gpd_recovers_shape() {
        let mut r = rng::stream(4, 0);
        let (k, sigma) = (0.3, 2.0);
        let mut x: Vec<f64> = (0..4000)
            .map(|_| gpd_quantile(rng::uniform(&mut r), k, sigma))
            .collect();
        x.sort_by(f64::total_cmp);
        let (kh, sh) = gpd_fit(&x);
        assert!((kh - k).abs() < 0.08, "{kh}");
        assert!((sh / sigma - 1.0).abs() < 0.15, "{sh}");
    }

    #[test]
    fn smoothing_keeps_order_and_truncates() {
        let mut r = rng::stream(8, 0);
        let mut lw: Vec<f64> = (0..1000).map(|_| 2.0 * rng::standard_normal(&mut r)).collect();
        let raw = lw.clone();
        let k = psis_smooth(&mut lw);
        assert!(k.is_finite());
        assert!(lw.iter().all(|&w| w <= 0.0));
        let mut idx: Vec<usize> = (0..raw.len()).collect();
        idx.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        assert!(idx.windows(2).all(|w| lw[w[0]] <= lw[w[1]] + 1e-12));
    }
}
