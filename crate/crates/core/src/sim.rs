//! Simulation study: synthetic multi-country data under a homogeneous,
//! partly or fully heterogeneous truth, fitted by each pooled or
//! heterogeneous method and scored against the truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compare, interval_score, predict_new_country, summarize_column};
use crate::error::{Error, Result};
use crate::matrix::{BaseParams, CauseSet, CountMatrix, MisclassMatrix};
use crate::model::{sample_hierarchy, EffectSizes, Hyperparams, ModelSpec, Variant};
use crate::rng;
use crate::sampler::{sample, PosteriorDraws, SamplerConfig};

/// Seed of the default truth parameters.
pub const DEFAULT_TRUTH_SEED: u64 = 20_240_601;

/// Interval level used for all interval scores (95% intervals).
pub const SCORE_LEVEL: f64 = 0.05;

/// Intrinsic accuracies, pull and effect sizes of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub accuracy: Vec<f64>,
    pub pull: Vec<f64>,
    pub effects: EffectSizes,
}

impl TruthParams {
    pub fn base(&self) -> Result<BaseParams> {
        BaseParams::new(self.accuracy.clone(), self.pull.clone())
    }

    /// Accuracies and pull from their default uniform priors; effect sizes
    /// from the shrinkage prior, redrawn until they show a strong pull
    /// (`50 <= omega_P <= 500`), moderate heterogeneity in sensitivities
    /// (`5 <= omega_S <= 25`) and stronger heterogeneity in relative false
    /// positives (`1 <= omega_R <= 10`, `omega_R < omega_S`).
    pub fn draw_default(c: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0);
        let accuracy = (0..c).map(|_| rng::beta(&mut r, 1.0, 1.0)).collect();
        let pull = rng::dirichlet(&mut r, &vec![1.0; c]);
        let mut omega = || {
            let u = rng::beta(&mut r, 0.5, 0.5);
            (1.0 - u) / u
        };
        let effects = loop {
            let e = EffectSizes {
                omega_p: omega(),
                omega_s: omega(),
                omega_r: omega(),
            };
            if (50.0..=500.0).contains(&e.omega_p)
                && (5.0..=25.0).contains(&e.omega_s)
                && (1.0..=10.0).contains(&e.omega_r)
                && e.omega_r < e.omega_s
            {
                break e;
            }
        };
        Self {
            accuracy,
            pull,
            effects,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Truth scenario: homogeneous, partly-het or fully-het.
    pub truth: Variant,
    pub n_causes: usize,
    pub n_countries: usize,
    pub n_per_country: u64,
    pub replications: usize,
    /// `None` draws them with [`TruthParams::draw_default`].
    pub truth_params: Option<TruthParams>,
    /// Fixed per-country truth matrices; when absent they are drawn from the
    /// hierarchy afresh in each replication.
    pub truth_matrices: Option<Vec<MisclassMatrix>>,
    /// Gold-cause margin per country; uniform when absent.
    pub margins: Option<Vec<f64>>,
    pub methods: Vec<Variant>,
    pub hyper: Hyperparams,
    pub sampler: SamplerConfig,
    /// Countries held out in turn for out-of-sample prediction scores;
    /// 0 disables them.
    pub holdout_folds: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::desk(Variant::FullyHet)
    }
}

impl ScenarioConfig {
    /// 10 replications, one chain of 1000 warmup and 1000 retained draws,
    /// no hold-out fits.
    pub fn desk(truth: Variant) -> Self {
        Self {
            truth,
            n_causes: 5,
            n_countries: 6,
            n_per_country: 50,
            replications: 10,
            truth_params: None,
            truth_matrices: None,
            margins: None,
            methods: vec![Variant::Homogeneous, Variant::PartlyHet, Variant::FullyHet],
            hyper: Hyperparams::default(),
            sampler: SamplerConfig {
                chains: 1,
                warmup: 1000,
                draws: 1000,
                ..SamplerConfig::default()
            },
            holdout_folds: 0,
            seed: 1,
        }
    }

    /// 50 replications, one chain of 5000 warmup and 5000 retained draws,
    /// every country held out once.
    pub fn full(truth: Variant) -> Self {
        Self {
            replications: 50,
            sampler: SamplerConfig {
                chains: 1,
                warmup: 5000,
                draws: 5000,
                ..SamplerConfig::default()
            },
            holdout_folds: 6,
            ..Self::desk(truth)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = |m: String| Err(Error::Spec(m));
        if self.truth == Variant::Base {
            return spec("truth scenario must be homogeneous, partly-het or fully-het".into());
        }
        if self.n_causes < 2 {
            return spec("at least 2 causes are needed".into());
        }
        if self.n_countries < 2 {
            return spec("at least 2 countries are needed".into());
        }
        if self.n_per_country < 1 {
            return spec("n_per_country must be at least 1".into());
        }
        if self.replications < 1 {
            return spec("at least one replication is needed".into());
        }
        if self.methods.is_empty() || self.methods.contains(&Variant::Base) {
            return spec("methods must be a non-empty list of non-base variants".into());
        }
        if self.holdout_folds > self.n_countries {
            return spec(format!(
                "{} hold-out folds for {} countries",
                self.holdout_folds, self.n_countries
            ));
        }
        if self.holdout_folds > 0 && self.n_countries < 3 {
            return spec("hold-out fits need at least 3 countries".into());
        }
        if let Some(t) = &self.truth_params {
            t.base()?;
            if t.accuracy.len() != self.n_causes {
                return Err(Error::Dimension {
                    expected: self.n_causes,
                    found: t.accuracy.len(),
                });
            }
            if self.truth == Variant::PartlyHet && t.effects.omega_r.is_finite() {
                return spec("a partly-het truth carries no omega_R; leave it infinite".into());
            }
        }
        if let Some(m) = &self.truth_matrices {
            if m.len() != self.n_countries {
                return Err(Error::Dimension {
                    expected: self.n_countries,
                    found: m.len(),
                });
            }
            if let Some(bad) = m.iter().find(|x| x.dim() != self.n_causes) {
                return Err(Error::Dimension {
                    expected: self.n_causes,
                    found: bad.dim(),
                });
            }
        }
        if let Some(p) = &self.margins {
            if p.len() != self.n_causes {
                return Err(Error::Dimension {
                    expected: self.n_causes,
                    found: p.len(),
                });
            }
            crate::matrix::check_simplex("margins", p)?;
        }
        self.hyper.validate(self.n_causes)?;
        self.sampler.validate()
    }

    pub fn truth_params(&self) -> TruthParams {
        self.truth_params.clone().unwrap_or_else(|| {
            let mut t = TruthParams::draw_default(self.n_causes, DEFAULT_TRUTH_SEED);
            if self.truth == Variant::PartlyHet {
                t.effects.omega_r = f64::INFINITY;
            }
            t
        })
    }

    pub fn countries(&self) -> Vec<String> {
        (1..=self.n_countries).map(|k| format!("country{k}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub countries: Vec<String>,
    pub counts: Vec<CountMatrix>,
    pub truth: Vec<MisclassMatrix>,
}

/// Truth matrices and counts for one replication.
pub fn generate_dataset(cfg: &ScenarioConfig, replication_seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let c = cfg.n_causes;
    let s = cfg.n_countries;
    let mut r = rng::stream(replication_seed, 0);
    let truth = match &cfg.truth_matrices {
        Some(m) => m.clone(),
        None => {
            let t = cfg.truth_params();
            let mut effects = t.effects;
            if cfg.truth == Variant::PartlyHet {
                effects.omega_r = f64::INFINITY;
            }
            let block = sample_hierarchy(
                cfg.truth,
                s,
                cfg.hyper.jeffreys_offset,
                &t.base()?,
                &effects,
                &mut r,
            );
            (0..s).map(|k| block.country_matrix(k)).collect::<Result<_>>()?
        }
    };
    let margins = cfg.margins.clone().unwrap_or_else(|| vec![1.0 / c as f64; c]);
    let causes = CauseSet::numbered(c)?;
    let counts = truth
        .iter()
        .map(|phi| {
            let n_rows = rng::multinomial(&mut r, cfg.n_per_country, &margins);
            let mut t = CountMatrix::zeros(causes.clone());
            for (i, &n) in n_rows.iter().enumerate() {
                for (j, v) in rng::multinomial(&mut r, n, phi.row(i)).into_iter().enumerate() {
                    t.set(i, j, v);
                }
            }
            t
        })
        .collect();
    Ok(Dataset {
        countries: cfg.countries(),
        counts,
        truth,
    })
}

/// Metrics of one method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub replication: usize,
    pub seed: u64,
    pub method: Variant,
    pub waic: f64,
    pub waic_se: f64,
    pub loo_ic: f64,
    pub loo_se: f64,
    pub max_pareto_k: f64,
    pub n_high_k: usize,
    /// Mean squared error of posterior-mean country matrices.
    pub mse: f64,
    /// Mean 95% interval score over country matrix cells.
    pub interval_score: f64,
    /// Mean 95% prediction-interval score over held-out countries.
    pub holdout_interval_score: Option<f64>,
    pub divergences: usize,
    pub max_rhat: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedFit {
    pub replication: usize,
    pub seed: u64,
    pub method: Variant,
    pub error: String,
}

/// Mean and Monte-Carlo standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, n }
    }

    /// `|mean| <= z * se`.
    pub fn within(&self, z: f64) -> bool {
        self.mean.abs() <= z * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Variant,
    pub waic: McEstimate,
    pub loo_ic: McEstimate,
    pub mse: McEstimate,
    pub interval_score: McEstimate,
    pub holdout_interval_score: Option<McEstimate>,
}

/// Differences `a - b` over replications where both fits succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: Variant,
    pub b: Variant,
    pub waic_diff: McEstimate,
    pub loo_diff: McEstimate,
    pub interval_score_diff: McEstimate,
    /// Replications where `a` has the lower WAIC.
    pub waic_wins: usize,
    pub loo_wins: usize,
    pub interval_score_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub truth: Variant,
    pub truth_params: Option<TruthParams>,
    pub results: Vec<MethodResult>,
    pub failures: Vec<FailedFit>,
    pub summaries: Vec<MethodSummary>,
    pub comparisons: Vec<PairwiseComparison>,
}

impl StudyResult {
    pub fn comparison(&self, a: Variant, b: Variant) -> Option<&PairwiseComparison> {
        self.comparisons.iter().find(|p| p.a == a && p.b == b)
    }

    pub fn summary(&self, method: Variant) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Name of the draw column holding cell `(i, j)` of country `s`.
fn cell_name(method: Variant, s: usize, i: usize, j: usize) -> String {
    if method.is_heterogeneous() {
        format!("phi_s[{},{},{}]", s + 1, i + 1, j + 1)
    } else {
        format!("phi[{},{}]", i + 1, j + 1)
    }
}

fn in_sample_scores(draws: &PosteriorDraws, truth: &[MisclassMatrix]) -> Result<(f64, f64)> {
    let mut sq = 0.0;
    let mut score = 0.0;
    let mut n = 0usize;
    for (s, phi) in truth.iter().enumerate() {
        let c = phi.dim();
        for i in 0..c {
            for j in 0..c {
                let name = cell_name(draws.variant, s, i, j);
                let row = summarize_column(&name, &draws.column_by_name(&name)?)?;
                let x = phi.get(i, j);
                sq += (row.mean - x).powi(2);
                score += interval_score(row.lower95(), row.upper95(), x, SCORE_LEVEL)?;
                n += 1;
            }
        }
    }
    Ok((sq / n as f64, score / n as f64))
}

fn holdout_score(
    cfg: &ScenarioConfig,
    data: &Dataset,
    method: Variant,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for fold in 0..cfg.holdout_folds {
        let keep: Vec<usize> = (0..cfg.n_countries).filter(|&k| k != fold).collect();
        let spec = ModelSpec::new(
            method,
            cfg.hyper.clone(),
            keep.iter().map(|&k| data.countries[k].clone()).collect(),
            keep.iter().map(|&k| data.counts[k].clone()).collect(),
        )?;
        let fold_seed = rng::derive_seed(seed, fold as u64);
        let sampler = SamplerConfig {
            seed: fold_seed,
            ..cfg.sampler
        };
        let (draws, _) = sample(&spec, &sampler)?;
        let pred = predict_new_country(&draws, &spec, &data.countries[fold], fold_seed)?;
        let phi = &data.truth[fold];
        for i in 0..cfg.n_causes {
            for j in 0..cfg.n_causes {
                let row = summarize_column("cell", &pred.cell(i, j))?;
                total += interval_score(row.lower95(), row.upper95(), phi.get(i, j), SCORE_LEVEL)?;
                n += 1;
            }
        }
    }
    Ok(total / n as f64)
}

fn fit_method(
    cfg: &ScenarioConfig,
    data: &Dataset,
    replication: usize,
    method_index: usize,
    rep_seed: u64,
) -> std::result::Result<MethodResult, FailedFit> {
    let method = cfg.methods[method_index];
    let seed = rng::derive_seed(rep_seed, method_index as u64 + 1);
    let run = || -> Result<MethodResult> {
        let spec = ModelSpec::new(
            method,
            cfg.hyper.clone(),
            data.countries.clone(),
            data.counts.clone(),
        )?;
        let sampler = SamplerConfig { seed, ..cfg.sampler };
        let (draws, diag) = sample(&spec, &sampler)?;
        let metrics = compare(&draws.loglik_matrix())?;
        let (mse, score) = in_sample_scores(&draws, &data.truth)?;
        let holdout = if cfg.holdout_folds > 0 {
            Some(holdout_score(cfg, data, method, seed)?)
        } else {
            None
        };
        Ok(MethodResult {
            replication,
            seed,
            method,
            waic: metrics.waic.waic,
            waic_se: metrics.waic.se,
            loo_ic: metrics.loo.loo_ic,
            loo_se: metrics.loo.se,
            max_pareto_k: metrics
                .loo
                .pareto_k
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            n_high_k: metrics.loo.high_k.len(),
            mse,
            interval_score: score,
            holdout_interval_score: holdout,
            divergences: diag.divergences,
            max_rhat: diag.max_rhat(),
            flagged: diag.flagged,
        })
    };
    run().map_err(|e| FailedFit {
        replication,
        seed,
        method,
        error: e.to_string(),
    })
}

/// Replication seeds are derived from `cfg.seed`, method seeds from the
/// replication seed, so every cell can be re-run alone.
pub fn replication_seed(cfg: &ScenarioConfig, replication: usize) -> u64 {
    rng::derive_seed(cfg.seed, replication as u64)
}

/// Runs every replication and method. Failed fits are listed in
/// `failures` and left out of the aggregates.
pub fn run_study(cfg: &ScenarioConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let per_rep: Vec<Vec<std::result::Result<MethodResult, FailedFit>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(cfg, rep);
            let data = generate_dataset(cfg, seed)?;
            Ok((0..cfg.methods.len())
                .map(|m| fit_method(cfg, &data, rep, m, seed))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for r in per_rep.into_iter().flatten() {
        match r {
            Ok(x) => results.push(x),
            Err(f) => failures.push(f),
        }
    }
    let summaries = cfg
        .methods
        .iter()
        .map(|&m| {
            let rows: Vec<&MethodResult> = results.iter().filter(|r| r.method == m).collect();
            let pick = |f: fn(&MethodResult) -> f64| {
                McEstimate::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let holdout: Vec<f64> = rows.iter().filter_map(|r| r.holdout_interval_score).collect();
            MethodSummary {
                method: m,
                waic: pick(|r| r.waic),
                loo_ic: pick(|r| r.loo_ic),
                mse: pick(|r| r.mse),
                interval_score: pick(|r| r.interval_score),
                holdout_interval_score: (!holdout.is_empty()).then(|| McEstimate::of(&holdout)),
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    for (ia, &a) in cfg.methods.iter().enumerate() {
        for &b in &cfg.methods[ia + 1..] {
            comparisons.push(pairwise(&results, a, b, cfg.replications));
            comparisons.push(pairwise(&results, b, a, cfg.replications));
        }
    }
    Ok(StudyResult {
        truth: cfg.truth,
        truth_params: cfg.truth_matrices.is_none().then(|| cfg.truth_params()),
        results,
        failures,
        summaries,
        comparisons,
    })
}

fn pairwise(results: &[MethodResult], a: Variant, b: Variant, reps: usize) -> PairwiseComparison {
    let find = |m: Variant, rep: usize| results.iter().find(|r| r.method == m && r.replication == rep);
    let pairs: Vec<(&MethodResult, &MethodResult)> = (0..reps)
        .filter_map(|rep| Some((find(a, rep)?, find(b, rep)?)))
        .collect();
    let diff = |f: fn(&MethodResult) -> f64| {
        McEstimate::of(&pairs.iter().map(|(x, y)| f(x) - f(y)).collect::<Vec<_>>())
    };
    let wins = |f: fn(&MethodResult) -> f64| pairs.iter().filter(|(x, y)| f(x) < f(y)).count();
    PairwiseComparison {
        a,
        b,
        waic_diff: diff(|r| r.waic),
        loo_diff: diff(|r| r.loo_ic),
        interval_score_diff: diff(|r| r.interval_score),
        waic_wins: wins(|r| r.waic),
        loo_wins: wins(|r| r.loo_ic),
        interval_score_wins: wins(|r| r.interval_score),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_truth_is_reproducible_and_ordered() {
        let a = TruthParams::draw_default(5, DEFAULT_TRUTH_SEED);
        let b = TruthParams::draw_default(5, DEFAULT_TRUTH_SEED);
        assert_eq!(a, b);
        assert!(a.effects.omega_r < a.effects.omega_s);
        assert!(a.base().is_ok());
    }

    #[test]
    fn counts_sum_to_country_size() {
        let cfg = ScenarioConfig::desk(Variant::FullyHet);
        let d = generate_dataset(&cfg, 3).unwrap();
        assert_eq!(d.counts.len(), 6);
        assert!(d.counts.iter().all(|t| t.total() == 50));
    }

    #[test]
    fn scenario_structure() {
        let hom = generate_dataset(&ScenarioConfig::desk(Variant::Homogeneous), 5).unwrap();
        assert!(hom.truth.windows(2).all(|w| w[0] == w[1]));

        let partly = generate_dataset(&ScenarioConfig::desk(Variant::PartlyHet), 5).unwrap();
        let d: Vec<_> = partly.truth.iter().map(crate::matrix::decompose).collect();
        for w in d.windows(2) {
            for (a, b) in w[0].rel_fp.iter().zip(&w[1].rel_fp) {
                let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
            assert_ne!(w[0].sensitivity, w[1].sensitivity);
        }
    }

    #[test]
    fn mc_estimate() {
        let e = McEstimate::of(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.se - 1.0).abs() < 1e-15);
        assert!(!e.within(1.9));
        assert!(e.within(2.0));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ScenarioConfig::desk(Variant::Base);
        assert!(cfg.validate().is_err());
        cfg.truth = Variant::FullyHet;
        cfg.holdout_folds = 7;
        assert!(cfg.validate().is_err());
    }
}
