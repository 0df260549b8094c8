//! Command-line front end: long-format count data in, CSV tables and a JSON
//! manifest out.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use misclass_core::sim::ScenarioConfig;
use misclass_core::Variant;

use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "misclass", version, about = "Country-specific misclassification matrices")]
pub struct Cli {
    /// TOML run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $MISCLASS_OUT_DIR, then ./misclass-out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: misclass_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SamplerFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

impl SamplerFlags {
    fn apply(&self, s: &mut misclass_core::SamplerConfig) {
        if let Some(x) = self.seed {
            s.seed = x;
        }
        if let Some(x) = self.chains {
            s.chains = x;
        }
        if let Some(x) = self.warmup {
            s.warmup = x;
        }
        if let Some(x) = self.draws {
            s.draws = x;
        }
        if let Some(x) = self.target_accept {
            s.target_accept = x;
        }
        if let Some(x) = self.max_depth {
            s.max_depth = x;
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Profile {
    /// 10 replications, 1000/1000 draws, no hold-out fits.
    Desk,
    /// 50 replications, 5000/5000 draws, every country held out.
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to long-format count data.
    Fit {
        #[arg(long)]
        input: Option<PathBuf>,
        /// base, homogeneous, partly-het or fully-het.
        #[arg(long, value_parser = parse_variant)]
        model: Option<Variant>,
        #[command(flatten)]
        sampler: SamplerFlags,
        /// Predict a new country without data (repeatable).
        #[arg(long = "predict")]
        predict: Vec<String>,
        /// Write every retained draw to draws.csv.
        #[arg(long)]
        dump_draws: bool,
        /// Exit with status 5 when R-hat > 1.01 or more than 1% of
        /// transitions diverge.
        #[arg(long)]
        strict: bool,
    },
    /// Predict new countries from a fit directory holding a draw dump.
    Predict {
        #[arg(long)]
        fit_dir: PathBuf,
        #[arg(long = "country", required = true)]
        countries: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the constant-odds check on raw counts.
    DiagnoseOdds {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Log-odds spread above which a cause pair is marked.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run the simulation study for one truth scenario.
    Simulate {
        /// homogeneous, partly-het or fully-het truth.
        #[arg(long, value_parser = parse_variant)]
        scenario: Option<Variant>,
        /// Start from a preset instead of the configured study.
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        holdout_folds: Option<usize>,
        #[command(flatten)]
        sampler: SamplerFlags,
    },
    /// Summary table from a draws.csv dump.
    SummarizeDraws {
        #[arg(long)]
        draws: PathBuf,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    match cli.command {
        Command::Fit {
            input,
            model,
            sampler,
            predict,
            dump_draws,
            strict,
        } => {
            if input.is_some() {
                cfg.input = input;
            }
            if let Some(m) = model {
                cfg.model = m;
            }
            sampler.apply(&mut cfg.sampler);
            if !predict.is_empty() {
                cfg.predict = predict;
            }
            cfg.dump_draws |= dump_draws;
            cfg.strict |= strict;
            let out = cfg.resolve_out_dir();
            commands::fit(&cfg, &out)
        }
        Command::Predict {
            fit_dir,
            countries,
            seed,
        } => {
            let out = cfg.resolve_out_dir();
            commands::predict(&cfg, &fit_dir, &countries, seed, &out)
        }
        Command::DiagnoseOdds { input, threshold } => {
            if input.is_some() {
                cfg.input = input;
            }
            if let Some(t) = threshold {
                cfg.odds_threshold = t;
            }
            let out = cfg.resolve_out_dir();
            commands::diagnose_odds(&cfg, &out)
        }
        Command::Simulate {
            scenario,
            profile,
            reps,
            holdout_folds,
            sampler,
        } => {
            let s = &mut cfg.simulate;
            let truth = scenario.unwrap_or(s.truth);
            if let Some(p) = profile {
                *s = match p {
                    Profile::Desk => ScenarioConfig::desk(truth),
                    Profile::Full => ScenarioConfig::full(truth),
                };
            }
            s.truth = truth;
            if let Some(r) = reps {
                s.replications = r;
            }
            if let Some(h) = holdout_folds {
                s.holdout_folds = h;
            }
            sampler.apply(&mut s.sampler);
            if let Some(seed) = sampler.seed {
                s.seed = seed;
            }
            let out = cfg.resolve_out_dir();
            commands::simulate(&cfg, &out).map(|_| ())
        }
        Command::SummarizeDraws { draws } => {
            let out = cfg.resolve_out_dir();
            commands::summarize_draws(&cfg, &draws, &out)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let _ = e.print();
                    if matches!(e.kind(), ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                        let mut cmd = <Cli as clap::CommandFactory>::command();
                        eprintln!("{}", cmd.render_usage());
                    }
                    CliError::Usage(String::new()).exit_code()
                }
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("misclass: {e}");
            e.exit_code()
        }
    }
}
