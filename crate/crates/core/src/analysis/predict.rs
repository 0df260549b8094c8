use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{recompose, MisclassMatrix, SensRelFp};
use crate::model::{EffectSizes, ModelSpec, Variant};
use crate::rng::{self, StreamRng};
use crate::sampler::PosteriorDraws;

/// Predictive misclassification matrices for a country without data, one
/// per retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraws {
    pub variant: Variant,
    pub causes: Vec<String>,
    pub country: String,
    pub matrices: Vec<MisclassMatrix>,
}

impl PredictiveDraws {
    pub fn cell(&self, i: usize, j: usize) -> Vec<f64> {
        self.matrices.iter().map(|m| m.get(i, j)).collect()
    }
}

/// `Beta(offset + 2 omega_S phi, offset + 2 omega_S (1 - phi))`.
pub fn predictive_sensitivity(rng: &mut StreamRng, omega_s: f64, phi_ii: f64, offset: f64) -> f64 {
    let gamma = EffectSizes {
        omega_p: f64::INFINITY,
        omega_s,
        omega_r: f64::INFINITY,
    }
    .gamma();
    rng::beta(rng, offset + gamma * phi_ii, offset + gamma * (1.0 - phi_ii))
}

fn column(draws: &PosteriorDraws, name: &str) -> Result<usize> {
    draws
        .index_of(name)
        .ok_or_else(|| Error::MissingParameter(name.to_string()))
}

/// Draws a new country's matrix per posterior draw. Homogeneous fits return
/// the pooled draws unchanged; partly heterogeneous fits redraw only the
/// sensitivities.
pub fn predict_new_country(
    draws: &PosteriorDraws,
    spec: &ModelSpec,
    country: &str,
    seed: u64,
) -> Result<PredictiveDraws> {
    if draws.variant == Variant::Base {
        return Err(Error::Unpredictable(draws.variant.to_string()));
    }
    if draws.variant != spec.variant {
        return Err(Error::Spec(format!(
            "draws come from a {} fit but the model is {}",
            draws.variant, spec.variant
        )));
    }
    if draws.total_draws() == 0 {
        return Err(Error::EmptyDraws);
    }
    let c = draws.causes.len();
    let offset = spec.hyper.jeffreys_offset;
    let first = column(draws, "phi[1,1]")?;
    let omega_s = draws.index_of("omega_S");
    let omega_r = draws.index_of("omega_R");
    let mut r = rng::stream(seed, 0);
    let mut matrices = Vec::with_capacity(draws.total_draws());
    for row in draws.chains.iter().flat_map(|ch| ch.values.iter()) {
        let cells = &row[first..first + c * c];
        let pooled = MisclassMatrix::new(c, cells.to_vec())?;
        if draws.variant == Variant::Homogeneous {
            matrices.push(pooled);
            continue;
        }
        let w_s = row[omega_s.ok_or_else(|| Error::MissingParameter("omega_S".into()))?];
        let effects = EffectSizes {
            omega_p: f64::INFINITY,
            omega_s: w_s,
            omega_r: omega_r.map_or(f64::INFINITY, |k| row[k]),
        };
        let mut sensitivity = Vec::with_capacity(c);
        let mut rel_fp = Vec::with_capacity(c);
        for i in 0..c {
            sensitivity.push(predictive_sensitivity(&mut r, w_s, pooled.get(i, i), offset));
            let off: Vec<f64> = (0..c).filter(|&j| j != i).map(|j| pooled.get(i, j)).collect();
            let total: f64 = off.iter().sum();
            let q: Vec<f64> = if total > 0.0 {
                off.iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / (c - 1) as f64; c - 1]
            };
            let q = match effects.delta(c) {
                Some(delta) if c > 2 => {
                    let conc: Vec<f64> = q.iter().map(|&x| offset + delta * x).collect();
                    rng::dirichlet(&mut r, &conc)
                }
                _ => q,
            };
            rel_fp.push(Some(q));
        }
        matrices.push(recompose(&SensRelFp {
            sensitivity,
            rel_fp,
        })?);
    }
    Ok(PredictiveDraws {
        variant: draws.variant,
        causes: draws.causes.clone(),
        country: country.to_string(),
        matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictive_mean_at_fixed_parameters() {
        let mut r = rng::stream(21, 0);
        let n = 40_000;
        let x: Vec<f64> = (0..n)
            .map(|_| predictive_sensitivity(&mut r, 10.0, 0.7, 0.5))
            .collect();
        let m = x.iter().sum::<f64>() / n as f64;
        let want = 14.5 / 21.0;
        // Beta(14.5, 6.5) sd = sqrt(ab / ((a+b)^2 (a+b+1)))
        let sd = (14.5f64 * 6.5 / (21.0 * 21.0 * 22.0)).sqrt();
        assert!((m - want).abs() < 3.0 * sd / (n as f64).sqrt(), "{m}");
    }

    #[test]
    fn huge_omega_is_degenerate() {
        let mut r = rng::stream(2, 0);
        for _ in 0..100 {
            let x = predictive_sensitivity(&mut r, 1e12, 0.7, 0.5);
            assert!((x - 0.7).abs() < 3e-3);
        }
    }
}
