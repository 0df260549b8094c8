//! Estimation of structured, country-specific misclassification matrices for a
//! noisy cause-of-death classifier scored against a gold standard.
//!
//! The model family is nested: a base model built from intrinsic accuracies
//! and a pull vector, a homogeneous model shrunk towards it, and partly or
//! fully heterogeneous country-level models shrunk towards the homogeneous
//! one. Posteriors are explored with an adaptive No-U-Turn sampler.

pub mod analysis;
pub mod error;
pub mod kernel;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod sim;

pub use error::{Error, Result};
pub use matrix::{
    base_rel_fp, build_base_matrix, decompose, pool, recompose, recover_base_params, BaseParams,
    CauseSet, CountMatrix, MisclassMatrix, OddsPair, OddsTable, SensRelFp,
};
pub use model::{EffectSizes, Hyperparams, Model, ModelSpec, ParamBlock, Variant};
pub use sampler::{Diagnostics, PosteriorDraws, SamplerConfig};
