//! Adaptive Hamiltonian Monte Carlo over a model's unconstrained posterior.
//!
//! Each chain owns a ChaCha stream keyed by `(seed, chain)`; chains run in
//! parallel and are merged by index, so output does not depend on thread
//! scheduling.

mod diagnostics;
mod nuts;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec, Variant};
use crate::rng;

pub use diagnostics::{diagnose, ess_bulk, rank_normalize, rhat, Diagnostics, ParamDiagnostic};
pub use nuts::{
    init_step_size, transition, ChainRun, DualAveraging, Hamiltonian, LogDensity, MetricWindows,
    Point, TransitionStats,
};

/// Attempts at a finite starting point before giving up.
pub const INIT_ATTEMPTS: usize = 100;

/// Share of divergent transitions above which a fit is flagged.
pub const DIVERGENCE_FLAG_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 5000,
            draws: 5000,
            target_accept: 0.8,
            max_depth: 10,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::SamplerConfig(m));
        if self.chains < 1 {
            return fail("chains must be at least 1".into());
        }
        if self.warmup < 100 {
            return fail(format!("warmup {} is below the minimum of 100", self.warmup));
        }
        if self.draws < 1 {
            return fail("draws must be at least 1".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return fail(format!("target_accept {} outside (0, 1)", self.target_accept));
        }
        if !(1..=30).contains(&self.max_depth) {
            return fail(format!("max_depth {} outside 1..=30", self.max_depth));
        }
        Ok(())
    }
}

/// Uniform start in `[-2, 2]^d` for `chain`, redrawn until the log density
/// and gradient are finite.
pub fn initialize_target<D: LogDensity + ?Sized>(
    target: &D,
    seed: u64,
    chain: u64,
) -> Result<Vec<f64>> {
    let mut r = rng::stream(seed, chain);
    nuts::initialize(target, &mut r, INIT_ATTEMPTS).ok_or(Error::Initialization {
        attempts: INIT_ATTEMPTS,
    })
}

/// Starting point of chain 0 for `spec`.
pub fn initialize(spec: &ModelSpec, seed: u64) -> Result<Vec<f64>> {
    initialize_target(&Model::new(spec.clone())?, seed, 0)
}

/// Runs `cfg.chains` chains on an arbitrary target; unconstrained output.
pub fn sample_target<D: LogDensity + ?Sized>(target: &D, cfg: &SamplerConfig) -> Result<Vec<ChainRun>> {
    cfg.validate()?;
    (0..cfg.chains as u64)
        .into_par_iter()
        .map(|chain| {
            let mut r = rng::stream(cfg.seed, chain);
            let init = nuts::initialize(target, &mut r, INIT_ATTEMPTS).ok_or(
                Error::Initialization {
                    attempts: INIT_ATTEMPTS,
                },
            )?;
            Ok(nuts::run_chain(
                target,
                init,
                cfg.warmup,
                cfg.draws,
                cfg.target_accept,
                cfg.max_depth,
                &mut r,
            ))
        })
        .collect()
}

/// One chain's retained draws on the constrained scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// `values[draw][scalar]`, in the order of [`PosteriorDraws::names`].
    pub values: Vec<Vec<f64>>,
    /// `loglik[draw][obs]`, in the order of [`PosteriorDraws::observations`].
    pub loglik: Vec<Vec<f64>>,
    pub lp: Vec<f64>,
    pub divergent: Vec<bool>,
    pub accept_stat: Vec<f64>,
    pub n_leapfrog: Vec<usize>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub variant: Variant,
    pub causes: Vec<String>,
    pub countries: Vec<String>,
    pub names: Vec<String>,
    /// `(country, gold cause)` per pointwise log-likelihood column.
    pub observations: Vec<(usize, usize)>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.values.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// One scalar's draws per chain.
    pub fn chain_columns(&self, idx: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.values.iter().map(|row| row[idx]).collect())
            .collect()
    }

    /// One scalar's draws with chains concatenated.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.values.iter().map(move |row| row[idx]))
            .collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        self.index_of(name)
            .map(|i| self.column(i))
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    /// Pointwise log-likelihood, `[draw][obs]`, chains concatenated.
    pub fn loglik_matrix(&self) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .flat_map(|c| c.loglik.iter().cloned())
            .collect()
    }

    pub fn divergences(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.divergent.iter().filter(|&&d| d).count())
            .sum()
    }
}

/// Fits `spec`: samples every chain, maps draws to the constrained scale,
/// stores pointwise log-likelihoods, and computes diagnostics.
pub fn sample(spec: &ModelSpec, cfg: &SamplerConfig) -> Result<(PosteriorDraws, Diagnostics)> {
    let model = Model::new(spec.clone())?;
    let runs = sample_target(&model, cfg)?;
    let chains = runs
        .into_iter()
        .map(|run| constrain_chain(&model, run))
        .collect::<Result<Vec<_>>>()?;
    let draws = PosteriorDraws {
        variant: spec.variant,
        causes: spec.causes().labels().to_vec(),
        countries: spec.countries.clone(),
        names: model.scalar_names(),
        observations: model.observations().to_vec(),
        chains,
    };
    let diag = diagnose(&draws);
    Ok((draws, diag))
}

fn constrain_chain(model: &Model, run: ChainRun) -> Result<ChainDraws> {
    let n = run.draws.len();
    let mut values = Vec::with_capacity(n);
    let mut loglik = Vec::with_capacity(n);
    for (k, u) in run.draws.iter().enumerate() {
        let block = model.constrain(u)?;
        values.push(block.scalars()?);
        let ll = model.pointwise_loglik(&block)?;
        if let Some(obs) = ll.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogLik { draw: k, obs });
        }
        loglik.push(ll);
    }
    Ok(ChainDraws {
        values,
        loglik,
        lp: run.lp,
        divergent: run.stats.iter().map(|s| s.divergent).collect(),
        accept_stat: run.stats.iter().map(|s| s.accept_stat).collect(),
        n_leapfrog: run.stats.iter().map(|s| s.n_leapfrog).collect(),
        step_size: run.step_size,
        inv_metric: run.inv_metric,
    })
}
