//! The nested model family over unconstrained coordinates.
//!
//! | variant       | free parameters                                              |
//! |---------------|--------------------------------------------------------------|
//! | `Base`        | accuracies `a` (C), pull `alpha` (C-simplex)                 |
//! | `Homogeneous` | + pooled sensitivities, relative-FP rows, `omega_P`          |
//! | `PartlyHet`   | + per-country sensitivities, `omega_S`                       |
//! | `FullyHet`    | + per-country relative-FP rows, `omega_R`                    |
//!
//! Probabilities use the logistic map, simplexes centred stick-breaking and
//! effect sizes the log scale. Every log-density is a [`Real`]-generic
//! function so the same code yields values and exact gradients.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::density::{
    beta_lpdf_log, dirichlet_lpdf_log, effect_size_prior_log_scale, multinomial_log_coef,
    multinomial_lpmf_log,
};
use crate::kernel::{gradient, interval_transform, simplex_transform, Layout, Real, Simplex, Unit};
use crate::matrix::{self, BaseParams, CauseSet, CountMatrix, MisclassMatrix, SensRelFp};
use crate::rng::{self, StreamRng};

/// Effect sizes are capped here wherever they enter a concentration, to keep
/// Beta/Dirichlet normalisers accurate.
pub const OMEGA_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Base,
    Homogeneous,
    PartlyHet,
    FullyHet,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Base,
        Variant::Homogeneous,
        Variant::PartlyHet,
        Variant::FullyHet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Homogeneous => "homogeneous",
            Variant::PartlyHet => "partly-het",
            Variant::FullyHet => "fully-het",
        }
    }

    pub fn is_heterogeneous(self) -> bool {
        matches!(self, Variant::PartlyHet | Variant::FullyHet)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown model variant `{s}`")))
    }
}

/// Prior hyperparameters. Defaults: uniform priors on accuracies and pull,
/// `Beta(0.5, 0.5)` on transformed effect sizes, Jeffreys offsets of 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Beta shapes `(b, d)` on intrinsic accuracies.
    pub accuracy_shape: [f64; 2],
    /// Dirichlet concentration on the pull; `None` means all ones.
    pub pull_concentration: Option<Vec<f64>>,
    /// `eps` in the `Beta(eps, eps)` shrinkage prior.
    pub shrinkage: f64,
    pub jeffreys_offset: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            accuracy_shape: [1.0, 1.0],
            pull_concentration: None,
            shrinkage: 0.5,
            jeffreys_offset: 0.5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self, c: usize) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !self.accuracy_shape.iter().all(|&x| x > 0.0 && x.is_finite()) {
            return bad("accuracy_shape", format!("{:?} must be positive", self.accuracy_shape));
        }
        if let Some(e) = &self.pull_concentration {
            if e.len() != c {
                return Err(Error::Dimension {
                    expected: c,
                    found: e.len(),
                });
            }
            if !e.iter().all(|&x| x > 0.0 && x.is_finite()) {
                return bad("pull_concentration", "entries must be positive".into());
            }
        }
        if !(self.shrinkage > 0.0 && self.shrinkage < 1.0) {
            return bad("shrinkage", format!("{} outside (0, 1)", self.shrinkage));
        }
        if !(self.jeffreys_offset > 0.0 && self.jeffreys_offset.is_finite()) {
            return bad("jeffreys_offset", format!("{} must be positive", self.jeffreys_offset));
        }
        Ok(())
    }

    pub fn pull_concentration(&self, c: usize) -> Vec<f64> {
        self.pull_concentration.clone().unwrap_or_else(|| vec![1.0; c])
    }
}

/// Prior sample sizes per category. `omega_r` may be infinite, meaning
/// relative false positives are shared across countries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizes {
    pub omega_p: f64,
    pub omega_s: f64,
    pub omega_r: f64,
}

impl EffectSizes {
    pub fn kappa(&self) -> f64 {
        2.0 * self.omega_p.min(OMEGA_CAP)
    }

    pub fn lambda(&self, c: usize) -> f64 {
        (c - 1) as f64 * self.omega_p.min(OMEGA_CAP)
    }

    pub fn gamma(&self) -> f64 {
        2.0 * self.omega_s.min(OMEGA_CAP)
    }

    /// `None` when relative FPs are structurally shared.
    pub fn delta(&self, c: usize) -> Option<f64> {
        self.omega_r
            .is_finite()
            .then(|| (c - 1) as f64 * self.omega_r.min(OMEGA_CAP))
    }
}

/// Variant, hyperparameters and per-country data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub hyper: Hyperparams,
    pub countries: Vec<String>,
    pub data: Vec<CountMatrix>,
}

impl ModelSpec {
    pub fn new(
        variant: Variant,
        hyper: Hyperparams,
        countries: Vec<String>,
        data: Vec<CountMatrix>,
    ) -> Result<Self> {
        if variant.is_heterogeneous() && data.len() < 2 {
            return Err(Error::Spec(format!(
                "{variant} model needs at least 2 countries, got {}",
                data.len()
            )));
        }
        Self::new_any_countries(variant, hyper, countries, data)
    }

    /// Like [`ModelSpec::new`] but accepts a single country for the
    /// heterogeneous variants, which is useful for term-by-term checks.
    pub fn new_any_countries(
        variant: Variant,
        hyper: Hyperparams,
        countries: Vec<String>,
        data: Vec<CountMatrix>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Spec("no count data".into()));
        }
        if countries.len() != data.len() {
            return Err(Error::Spec(format!(
                "{} country names for {} count matrices",
                countries.len(),
                data.len()
            )));
        }
        matrix::pool(&data)?;
        hyper.validate(data[0].dim())?;
        Ok(Self {
            variant,
            hyper,
            countries,
            data,
        })
    }

    pub fn causes(&self) -> &CauseSet {
        self.data[0].causes()
    }

    pub fn n_causes(&self) -> usize {
        self.causes().len()
    }

    pub fn n_countries(&self) -> usize {
        self.data.len()
    }

    /// Same data and hyperparameters under another variant.
    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        Self::new(variant, self.hyper.clone(), self.countries.clone(), self.data.clone())
    }

    /// Number of free unconstrained parameters.
    pub fn dimension(&self) -> usize {
        Ranges::new(self.variant, self.n_causes(), self.n_countries()).1.dim()
    }
}

#[derive(Debug, Clone)]
struct Ranges {
    accuracy: Range<usize>,
    pull: Range<usize>,
    sensitivity: Range<usize>,
    rel_fp: Range<usize>,
    omega_p: Range<usize>,
    country_sensitivity: Range<usize>,
    country_rel_fp: Range<usize>,
    omega_s: Range<usize>,
    omega_r: Range<usize>,
}

impl Ranges {
    fn new(variant: Variant, c: usize, s: usize) -> (Self, Layout) {
        let mut l = Layout::default();
        let hom = variant != Variant::Base;
        let het = variant.is_heterogeneous();
        let full = variant == Variant::FullyHet;
        let r = Ranges {
            accuracy: l.push("accuracy", c),
            pull: l.push("pull", c - 1),
            sensitivity: l.push("sensitivity", if hom { c } else { 0 }),
            rel_fp: l.push("rel_fp", if hom { c * (c - 2) } else { 0 }),
            omega_p: l.push("log_omega_p", usize::from(hom)),
            country_sensitivity: l.push("country_sensitivity", if het { s * c } else { 0 }),
            country_rel_fp: l.push("country_rel_fp", if full { s * c * (c - 2) } else { 0 }),
            omega_s: l.push("log_omega_s", usize::from(het)),
            omega_r: l.push("log_omega_r", usize::from(full)),
        };
        (r, l)
    }
}

/// Constrained parameter values for one point of a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub variant: Variant,
    pub accuracy: Vec<f64>,
    pub pull: Vec<f64>,
    pub sensitivity: Option<Vec<f64>>,
    /// `rel_fp[i]` lists `q_ij` for `j != i` in cause order.
    pub rel_fp: Option<Vec<Vec<f64>>>,
    pub omega_p: Option<f64>,
    /// Indexed `[country][cause]`.
    pub country_sensitivity: Option<Vec<Vec<f64>>>,
    /// Indexed `[country][cause]`; absent under partial heterogeneity.
    pub country_rel_fp: Option<Vec<Vec<Vec<f64>>>>,
    pub omega_s: Option<f64>,
    pub omega_r: Option<f64>,
}

impl ParamBlock {
    pub fn n_causes(&self) -> usize {
        self.accuracy.len()
    }

    pub fn n_countries(&self) -> usize {
        self.country_sensitivity.as_ref().map_or(0, Vec::len)
    }

    pub fn base_params(&self) -> Result<BaseParams> {
        BaseParams::new(self.accuracy.clone(), self.pull.clone())
    }

    /// The pooled (homogeneous) matrix; the base matrix under `Base`.
    pub fn pooled_matrix(&self) -> Result<MisclassMatrix> {
        match (&self.sensitivity, &self.rel_fp) {
            (Some(sens), Some(q)) => recompose_rows(sens, q),
            _ => Ok(matrix::build_base_matrix(&self.base_params()?)),
        }
    }

    /// Country `s`'s matrix; equal to the pooled matrix for pooled variants.
    pub fn country_matrix(&self, s: usize) -> Result<MisclassMatrix> {
        let Some(cs) = &self.country_sensitivity else {
            return self.pooled_matrix();
        };
        let q = match &self.country_rel_fp {
            Some(cq) => &cq[s],
            None => self.rel_fp.as_ref().expect("heterogeneous block has pooled rel_fp"),
        };
        recompose_rows(&cs[s], q)
    }

    pub fn effect_sizes(&self) -> EffectSizes {
        EffectSizes {
            omega_p: self.omega_p.unwrap_or(f64::INFINITY),
            omega_s: self.omega_s.unwrap_or(f64::INFINITY),
            omega_r: self.omega_r.unwrap_or(f64::INFINITY),
        }
    }

    /// Named scalars stored per posterior draw: accuracies, pull, effect
    /// sizes, pooled matrix cells, then country matrix cells. Indices are
    /// 1-based.
    pub fn scalar_names(variant: Variant, c: usize, s: usize) -> Vec<String> {
        let mut names = Vec::new();
        names.extend((1..=c).map(|i| format!("a[{i}]")));
        names.extend((1..=c).map(|i| format!("alpha[{i}]")));
        if variant != Variant::Base {
            names.push("omega_P".into());
        }
        if variant.is_heterogeneous() {
            names.push("omega_S".into());
        }
        if variant == Variant::FullyHet {
            names.push("omega_R".into());
        }
        for i in 1..=c {
            names.extend((1..=c).map(|j| format!("phi[{i},{j}]")));
        }
        if variant.is_heterogeneous() {
            for k in 1..=s {
                for i in 1..=c {
                    names.extend((1..=c).map(|j| format!("phi_s[{k},{i},{j}]")));
                }
            }
        }
        names
    }

    /// Values in the order of [`ParamBlock::scalar_names`].
    pub fn scalars(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.accuracy);
        out.extend_from_slice(&self.pull);
        out.extend(self.omega_p);
        out.extend(self.omega_s);
        out.extend(self.omega_r);
        out.extend_from_slice(self.pooled_matrix()?.as_slice());
        for s in 0..self.n_countries() {
            out.extend_from_slice(self.country_matrix(s)?.as_slice());
        }
        Ok(out)
    }
}

fn recompose_rows(sens: &[f64], q: &[Vec<f64>]) -> Result<MisclassMatrix> {
    matrix::recompose(&SensRelFp {
        sensitivity: sens.to_vec(),
        rel_fp: q.iter().map(|r| Some(r.clone())).collect(),
    })
}

struct Unpacked<T> {
    accuracy: Vec<Unit<T>>,
    pull: Simplex<T>,
    sensitivity: Vec<Unit<T>>,
    rel_fp: Vec<Simplex<T>>,
    log_omega_p: Option<T>,
    country_sensitivity: Vec<Vec<Unit<T>>>,
    country_rel_fp: Vec<Vec<Simplex<T>>>,
    log_omega_s: Option<T>,
    log_omega_r: Option<T>,
}

/// A [`ModelSpec`] compiled for evaluation: layout, pooled counts and cached
/// multinomial coefficients.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    ranges: Ranges,
    layout: Layout,
    pooled: CountMatrix,
    pooled_coef: Vec<f64>,
    country_coef: Vec<Vec<f64>>,
    observations: Vec<(usize, usize)>,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let c = spec.n_causes();
        let s = spec.n_countries();
        let (ranges, layout) = Ranges::new(spec.variant, c, s);
        let pooled = matrix::pool(&spec.data)?;
        let pooled_coef = (0..c).map(|i| multinomial_log_coef(pooled.row(i))).collect();
        let country_coef = spec
            .data
            .iter()
            .map(|t| (0..c).map(|i| multinomial_log_coef(t.row(i))).collect())
            .collect();
        let observations = spec
            .data
            .iter()
            .enumerate()
            .flat_map(|(k, t)| (0..c).filter(move |&i| t.row_total(i) > 0).map(move |i| (k, i)))
            .collect();
        Ok(Self {
            spec,
            ranges,
            layout,
            pooled,
            pooled_coef,
            country_coef,
            observations,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn n_causes(&self) -> usize {
        self.spec.n_causes()
    }

    pub fn n_countries(&self) -> usize {
        self.spec.n_countries()
    }

    pub fn scalar_names(&self) -> Vec<String> {
        ParamBlock::scalar_names(self.variant(), self.n_causes(), self.n_countries())
    }

    /// `(country, gold cause)` of each pointwise log-likelihood column; rows
    /// without data are omitted.
    pub fn observations(&self) -> &[(usize, usize)] {
        &self.observations
    }

    fn unpack<T: Real>(&self, u: &[T]) -> (Unpacked<T>, T) {
        let c = self.n_causes();
        let r = &self.ranges;
        let mut log_jac = T::zero();
        let mut units = |xs: &[T]| -> Vec<Unit<T>> {
            xs.iter()
                .map(|&x| {
                    let (p, lj) = interval_transform(x);
                    log_jac = log_jac + lj;
                    p
                })
                .collect()
        };
        let accuracy = units(&u[r.accuracy.clone()]);
        let sensitivity = units(&u[r.sensitivity.clone()]);
        let country_sensitivity: Vec<Vec<Unit<T>>> = u[r.country_sensitivity.clone()]
            .chunks(c)
            .map(|ch| units(ch))
            .collect();

        let mut simplex = |xs: &[T]| {
            let (p, lj) = simplex_transform(xs);
            log_jac = log_jac + lj;
            p
        };
        let pull = simplex(&u[r.pull.clone()]);
        let row_len = c - 2;
        let rows = |range: &Range<usize>, simplex: &mut dyn FnMut(&[T]) -> Simplex<T>| {
            let n_rows = if row_len == 0 {
                range.len()
            } else {
                range.len() / row_len
            };
            (0..n_rows)
                .map(|k| simplex(&u[range.start + k * row_len..range.start + (k + 1) * row_len]))
                .collect::<Vec<_>>()
        };
        let hom = self.variant() != Variant::Base;
        let rel_fp = if hom {
            if row_len == 0 {
                (0..c).map(|_| simplex(&[])).collect()
            } else {
                rows(&r.rel_fp, &mut simplex)
            }
        } else {
            Vec::new()
        };
        let country_rel_fp = if self.variant() == Variant::FullyHet {
            let flat = if row_len == 0 {
                (0..self.n_countries() * c).map(|_| simplex(&[])).collect()
            } else {
                rows(&r.country_rel_fp, &mut simplex)
            };
            let mut it = flat.into_iter();
            (0..self.n_countries())
                .map(|_| it.by_ref().take(c).collect())
                .collect()
        } else {
            Vec::new()
        };
        let scalar = |range: &Range<usize>| (!range.is_empty()).then(|| u[range.start]);
        let unpacked = Unpacked {
            accuracy,
            pull,
            sensitivity,
            rel_fp,
            log_omega_p: scalar(&r.omega_p),
            country_sensitivity,
            country_rel_fp,
            log_omega_s: scalar(&r.omega_s),
            log_omega_r: scalar(&r.omega_r),
        };
        (unpacked, log_jac)
    }

    /// Log posterior density on the unconstrained scale (Jacobians included).
    pub fn log_density<T: Real>(&self, u: &[T]) -> T {
        let (p, log_jac) = self.unpack(u);
        let c = self.n_causes();
        let hyper = &self.spec.hyper;
        let eps = hyper.shrinkage;
        let off = hyper.jeffreys_offset;
        let k = |x: f64| T::constant(x);
        let mut lp = log_jac;

        let [b, d] = hyper.accuracy_shape;
        for a in &p.accuracy {
            lp = lp + beta_lpdf_log(a.ln_p, a.ln_1mp, k(b), k(d));
        }
        let e: Vec<T> = hyper.pull_concentration(c).into_iter().map(k).collect();
        lp = lp + dirichlet_lpdf_log(&p.pull.ln_p, &e);

        if self.variant() == Variant::Base {
            for i in 0..c {
                if self.pooled.row_total(i) == 0 {
                    continue;
                }
                let a = &p.accuracy[i];
                let ln_phi: Vec<T> = (0..c)
                    .map(|j| {
                        if j == i {
                            (a.p + a.ln_1mp.exp() * p.pull.p[i]).ln()
                        } else {
                            a.ln_1mp + p.pull.ln_p[j]
                        }
                    })
                    .collect();
                lp = lp + multinomial_lpmf_log(self.pooled.row(i), &ln_phi, self.pooled_coef[i]);
            }
            return lp;
        }

        let x_p = p.log_omega_p.expect("omega_P present");
        lp = lp + effect_size_prior_log_scale(x_p, eps);
        let omega_p = x_p.exp().min_const(OMEGA_CAP);
        let kappa = omega_p * 2.0;
        let lambda = omega_p * (c - 1) as f64;
        for i in 0..c {
            let a = &p.accuracy[i];
            let alpha_i = p.pull.p[i];
            let miss = a.ln_1mp.exp();
            let m = a.p + miss * alpha_i;
            let one_minus_m = miss * alpha_i.rsub(1.0);
            let sens = &p.sensitivity[i];
            lp = lp
                + beta_lpdf_log(
                    sens.ln_p,
                    sens.ln_1mp,
                    kappa * m + off,
                    kappa * one_minus_m + off,
                );
            if c > 2 {
                let rest = alpha_i.rsub(1.0);
                let conc: Vec<T> = (0..c)
                    .filter(|&j| j != i)
                    .map(|j| lambda * p.pull.p[j] / rest + off)
                    .collect();
                lp = lp + dirichlet_lpdf_log(&p.rel_fp[i].ln_p, &conc);
            }
        }

        if self.variant() == Variant::Homogeneous {
            for i in 0..c {
                if self.pooled.row_total(i) == 0 {
                    continue;
                }
                let ln_phi = row_log_probs(&p.sensitivity[i], &p.rel_fp[i], i, c);
                lp = lp + multinomial_lpmf_log(self.pooled.row(i), &ln_phi, self.pooled_coef[i]);
            }
            return lp;
        }

        let x_s = p.log_omega_s.expect("omega_S present");
        lp = lp + effect_size_prior_log_scale(x_s, eps);
        let gamma = x_s.exp().min_const(OMEGA_CAP) * 2.0;
        let delta = p.log_omega_r.map(|x_r| {
            lp = lp + effect_size_prior_log_scale(x_r, eps);
            x_r.exp().min_const(OMEGA_CAP) * (c - 1) as f64
        });

        for (s, counts) in self.spec.data.iter().enumerate() {
            for i in 0..c {
                let pooled_sens = &p.sensitivity[i];
                let sens = &p.country_sensitivity[s][i];
                lp = lp
                    + beta_lpdf_log(
                        sens.ln_p,
                        sens.ln_1mp,
                        gamma * pooled_sens.p + off,
                        gamma * pooled_sens.ln_1mp.exp() + off,
                    );
                let q = match delta {
                    Some(delta) => {
                        let q = &p.country_rel_fp[s][i];
                        if c > 2 {
                            let conc: Vec<T> =
                                p.rel_fp[i].p.iter().map(|&qi| delta * qi + off).collect();
                            lp = lp + dirichlet_lpdf_log(&q.ln_p, &conc);
                        }
                        q
                    }
                    None => &p.rel_fp[i],
                };
                if counts.row_total(i) == 0 {
                    continue;
                }
                let ln_phi = row_log_probs(sens, q, i, c);
                lp = lp + multinomial_lpmf_log(counts.row(i), &ln_phi, self.country_coef[s][i]);
            }
        }
        lp
    }

    /// Log density and its gradient at `u`.
    pub fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        gradient(u, grad, |x| self.log_density(x))
    }

    pub fn log_posterior(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(u)?;
        let mut grad = vec![0.0; u.len()];
        let lp = self.log_density_grad(u, &mut grad);
        Ok((lp, grad))
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Layout {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Maps an unconstrained point to parameter values.
    pub fn constrain(&self, u: &[f64]) -> Result<ParamBlock> {
        self.check_len(u)?;
        let (p, _) = self.unpack(u);
        let variant = self.variant();
        let vals = |units: &[Unit<f64>]| units.iter().map(|x| x.p).collect::<Vec<_>>();
        let hom = variant != Variant::Base;
        let het = variant.is_heterogeneous();
        Ok(ParamBlock {
            variant,
            accuracy: vals(&p.accuracy),
            pull: p.pull.p,
            sensitivity: hom.then(|| vals(&p.sensitivity)),
            rel_fp: hom.then(|| p.rel_fp.into_iter().map(|s| s.p).collect()),
            omega_p: p.log_omega_p.map(f64::exp),
            country_sensitivity: het.then(|| p.country_sensitivity.iter().map(|r| vals(r)).collect()),
            country_rel_fp: (variant == Variant::FullyHet).then(|| {
                p.country_rel_fp
                    .into_iter()
                    .map(|rows| rows.into_iter().map(|s| s.p).collect())
                    .collect()
            }),
            omega_s: p.log_omega_s.map(f64::exp),
            omega_r: p.log_omega_r.map(f64::exp),
        })
    }

    /// Multinomial log-likelihood of each observed `(country, gold cause)`
    /// row, in the order of [`Model::observations`]. Pooled variants score
    /// every country's row against the pooled matrix.
    pub fn pointwise_loglik(&self, block: &ParamBlock) -> Result<Vec<f64>> {
        let c = self.n_causes();
        let mats = (0..self.n_countries())
            .map(|s| block.country_matrix(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .observations
            .iter()
            .map(|&(s, i)| {
                let ln_phi: Vec<f64> = mats[s].row(i).iter().map(|p| p.ln()).collect();
                debug_assert_eq!(ln_phi.len(), c);
                multinomial_lpmf_log(self.spec.data[s].row(i), &ln_phi, self.country_coef[s][i])
            })
            .collect())
    }

    /// One draw from the full generative hierarchy of the variant.
    pub fn prior_sample(&self, seed: u64) -> ParamBlock {
        let mut rng = rng::stream(seed, 0);
        let c = self.n_causes();
        let hyper = &self.spec.hyper;
        let [b, d] = hyper.accuracy_shape;
        let accuracy: Vec<f64> = (0..c).map(|_| rng::beta(&mut rng, b, d)).collect();
        let pull = rng::dirichlet(&mut rng, &hyper.pull_concentration(c));
        let mut omega = || {
            let u = rng::beta(&mut rng, hyper.shrinkage, hyper.shrinkage);
            (1.0 - u) / u
        };
        let v = self.variant();
        let effects = EffectSizes {
            omega_p: if v != Variant::Base { omega() } else { f64::INFINITY },
            omega_s: if v.is_heterogeneous() { omega() } else { f64::INFINITY },
            omega_r: if v == Variant::FullyHet { omega() } else { f64::INFINITY },
        };
        let base = BaseParams::new(accuracy, pull).expect("prior draws are valid");
        sample_hierarchy(
            v,
            self.n_countries(),
            hyper.jeffreys_offset,
            &base,
            &effects,
            &mut rng,
        )
    }
}

fn row_log_probs<T: Real>(sens: &Unit<T>, q: &Simplex<T>, i: usize, c: usize) -> Vec<T> {
    let mut others = q.ln_p.iter();
    (0..c)
        .map(|j| {
            if j == i {
                sens.ln_p
            } else {
                sens.ln_1mp + *others.next().expect("C - 1 entries")
            }
        })
        .collect()
}

/// Draws pooled and country-level rates given base parameters and effect
/// sizes. Infinite effect sizes give exact copies of the level above.
pub fn sample_hierarchy(
    variant: Variant,
    n_countries: usize,
    offset: f64,
    base: &BaseParams,
    effects: &EffectSizes,
    rng: &mut StreamRng,
) -> ParamBlock {
    let c = base.dim();
    let a = base.accuracy();
    let alpha = base.pull();
    let mut block = ParamBlock {
        variant,
        accuracy: a.to_vec(),
        pull: alpha.to_vec(),
        sensitivity: None,
        rel_fp: None,
        omega_p: None,
        country_sensitivity: None,
        country_rel_fp: None,
        omega_s: None,
        omega_r: None,
    };
    if variant == Variant::Base {
        return block;
    }
    let kappa = effects.kappa();
    let lambda = effects.lambda(c);
    let sens: Vec<f64> = (0..c)
        .map(|i| {
            let m = a[i] + (1.0 - a[i]) * alpha[i];
            let one_minus_m = (1.0 - a[i]) * (1.0 - alpha[i]);
            rng::beta(rng, offset + kappa * m, offset + kappa * one_minus_m)
        })
        .collect();
    let rel: Vec<Vec<f64>> = (0..c)
        .map(|i| {
            let conc: Vec<f64> = (0..c)
                .filter(|&j| j != i)
                .map(|j| offset + lambda * alpha[j] / (1.0 - alpha[i]))
                .collect();
            rng::dirichlet(rng, &conc)
        })
        .collect();
    block.omega_p = Some(effects.omega_p);
    if variant.is_heterogeneous() {
        let gamma = effects.gamma();
        let delta = if variant == Variant::FullyHet {
            effects.delta(c)
        } else {
            None
        };
        let mut country_sens = Vec::with_capacity(n_countries);
        let mut country_rel = Vec::with_capacity(n_countries);
        for _ in 0..n_countries {
            country_sens.push(
                sens.iter()
                    .map(|&p| rng::beta(rng, offset + gamma * p, offset + gamma * (1.0 - p)))
                    .collect::<Vec<_>>(),
            );
            if variant == Variant::FullyHet {
                country_rel.push(
                    rel.iter()
                        .map(|q| match delta {
                            Some(delta) => {
                                let conc: Vec<f64> = q.iter().map(|&x| offset + delta * x).collect();
                                rng::dirichlet(rng, &conc)
                            }
                            None => q.clone(),
                        })
                        .collect::<Vec<_>>(),
                );
            }
        }
        block.country_sensitivity = Some(country_sens);
        block.omega_s = Some(effects.omega_s);
        if variant == Variant::FullyHet {
            block.country_rel_fp = Some(country_rel);
            block.omega_r = Some(effects.omega_r);
        }
    }
    block.sensitivity = Some(sens);
    block.rel_fp = Some(rel);
    block
}
