//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use misclass_core::sim::ScenarioConfig;
use misclass_core::{Hyperparams, SamplerConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MISCLASS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "misclass-out";
/// Default log-odds spread above which `diagnose-odds` marks a pair.
pub const DEFAULT_ODDS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Variant,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub hyper: Hyperparams,
    pub sampler: SamplerConfig,
    /// New countries to predict after a fit.
    pub predict: Vec<String>,
    /// Write every retained draw to `draws.csv`.
    pub dump_draws: bool,
    pub strict: bool,
    pub odds_threshold: f64,
    pub simulate: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Variant::FullyHet,
            input: None,
            out_dir: None,
            hyper: Hyperparams::default(),
            sampler: SamplerConfig::default(),
            predict: Vec::new(),
            dump_draws: false,
            strict: false,
            odds_threshold: DEFAULT_ODDS_THRESHOLD,
            simulate: ScenarioConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Flag, then config file, then `MISCLASS_OUT_DIR`, then `misclass-out`.
    pub fn resolve_out_dir(&mut self) -> PathBuf {
        let dir = self.out_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
        });
        self.out_dir = Some(dir.clone());
        dir
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sampler.validate()?;
        if !(self.odds_threshold >= 0.0) {
            return Err(CliError::Config(format!(
                "odds_threshold {} must be nonnegative",
                self.odds_threshold
            )));
        }
        Ok(())
    }
}
