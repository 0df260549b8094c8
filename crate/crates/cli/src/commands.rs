use std::path::{Path, PathBuf};

use misclass_core::analysis::{compare, predict_new_country, summarize, summarize_column, SummaryTable};
use misclass_core::model::OMEGA_CAP;
use misclass_core::sampler::{sample, ChainDraws, Diagnostics, PosteriorDraws};
use misclass_core::sim::{run_study, McEstimate, StudyResult, TruthParams};
use misclass_core::{pool, CountMatrix, Model, ModelSpec, OddsTable, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest_path, Ingested};
use crate::report::{num, opt_num, summary_row, summary_table, Table, SUMMARY_HEADER};

/// Country label of pooled rows in output tables.
pub const POOLED: &str = "(pooled)";
/// `--strict` fails a fit above this split R-hat.
pub const STRICT_RHAT: f64 = 1.01;
/// `--strict` fails a fit above this share of divergent transitions.
pub const STRICT_DIVERGENCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub variant: Variant,
    pub causes: Vec<String>,
    pub countries: Vec<String>,
    /// Dimension of the unconstrained parameter vector.
    pub n_free_parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub divergences: usize,
    pub total_draws: usize,
    pub divergence_fraction: f64,
    pub max_rhat: Option<f64>,
    pub min_ess_bulk: f64,
    pub mean_accept_stat: f64,
    pub step_sizes: Vec<f64>,
    pub flagged: bool,
    pub warnings: Vec<String>,
}

impl From<&Diagnostics> for RunDiagnostics {
    fn from(d: &Diagnostics) -> Self {
        Self {
            divergences: d.divergences,
            total_draws: d.total_draws,
            divergence_fraction: d.divergence_fraction(),
            max_rhat: d.max_rhat(),
            min_ess_bulk: d.min_ess(),
            mean_accept_stat: d.mean_accept_stat,
            step_sizes: d.step_sizes.clone(),
            flagged: d.flagged,
            warnings: d.warnings.clone(),
        }
    }
}

/// Everything needed to re-run a command: the resolved configuration, the
/// seed and a checksum of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub omega_cap: f64,
    pub config: RunConfig,
    pub input: Option<InputInfo>,
    pub model: Option<ModelInfo>,
    pub diagnostics: Option<RunDiagnostics>,
    pub truth_params: Option<TruthParams>,
    pub outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &str, seed: u64, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            omega_cap: OMEGA_CAP,
            config: config.clone(),
            input: None,
            model: None,
            diagnostics: None,
            truth_params: None,
            outputs: Vec::new(),
        }
    }

    fn save(&self, dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }
}

/// Collects output tables and records their file names.
struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            names: Vec::new(),
        })
    }

    fn save(&mut self, name: &str, table: &Table) -> CliResult<()> {
        table.save(&self.dir.join(name))?;
        self.names.push(name.to_string());
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn require_input(cfg: &RunConfig) -> CliResult<(PathBuf, Ingested, InputInfo)> {
    let path = cfg
        .input
        .clone()
        .ok_or_else(|| CliError::Config("no input file given (--input or `input` in the config)".into()))?;
    let bytes = std::fs::read(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let data = ingest_path(&path)?;
    let info = InputInfo {
        path: path.clone(),
        sha256: sha256_hex(&bytes),
    };
    Ok((path, data, info))
}

fn odds_table(data: &Ingested, threshold: f64) -> CliResult<Table> {
    let labels = data.causes.labels();
    let mut table = Table::new(["country", "cause_j", "cause_k", "n_rows", "spread", "exceeds_threshold"]);
    let pooled = pool(&data.counts)?;
    let sets: Vec<(&str, &CountMatrix)> = data
        .countries
        .iter()
        .map(String::as_str)
        .zip(&data.counts)
        .chain(std::iter::once((POOLED, &pooled)))
        .collect();
    for (country, counts) in sets {
        for pair in OddsTable::from_counts(counts).pairs {
            let n = pair.entries.iter().filter(|e| e.1.is_some()).count();
            table.push(vec![
                country.to_string(),
                labels[pair.j].clone(),
                labels[pair.k].clone(),
                n.to_string(),
                opt_num(pair.spread),
                pair.spread.is_some_and(|s| s > threshold).to_string(),
            ]);
        }
    }
    Ok(table)
}

fn cell_table(draws: &PosteriorDraws) -> CliResult<Table> {
    let mut table = Table::new(["country", "gold_cause", "predicted_cause", "mean", "lower95", "upper95"]);
    let c = draws.causes.len();
    let mut sets = vec![(POOLED.to_string(), None)];
    if draws.variant.is_heterogeneous() {
        sets.extend(draws.countries.iter().enumerate().map(|(s, n)| (n.clone(), Some(s))));
    }
    for (country, s) in sets {
        for i in 0..c {
            for j in 0..c {
                let name = match s {
                    None => format!("phi[{},{}]", i + 1, j + 1),
                    Some(s) => format!("phi_s[{},{},{}]", s + 1, i + 1, j + 1),
                };
                let row = summarize_column(&name, &draws.column_by_name(&name)?)?;
                table.push(vec![
                    country.clone(),
                    draws.causes[i].clone(),
                    draws.causes[j].clone(),
                    num(row.mean),
                    num(row.lower95()),
                    num(row.upper95()),
                ]);
            }
        }
    }
    Ok(table)
}

fn comparison_tables(draws: &PosteriorDraws) -> CliResult<(Table, Table)> {
    let m = compare(&draws.loglik_matrix())?;
    let mut overall = Table::new(["criterion", "estimate", "se"]);
    let max_k = m.loo.pareto_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (name, est, se) in [
        ("waic", m.waic.waic, Some(m.waic.se)),
        ("loo_ic", m.loo.loo_ic, Some(m.loo.se)),
        ("lppd", m.waic.lppd, None),
        ("p_waic", m.waic.p_waic, None),
        ("elpd_loo", m.loo.elpd_loo, Some(m.loo.se / 2.0)),
        ("p_loo", m.loo.p_loo, None),
        ("max_pareto_k", max_k, None),
        ("n_high_pareto_k", m.loo.high_k.len() as f64, None),
    ] {
        overall.push(vec![name.into(), num(est), opt_num(se)]);
    }
    let mut pointwise = Table::new(["country", "gold_cause", "waic", "elpd_loo", "pareto_k", "high_k"]);
    for (o, &(s, i)) in draws.observations.iter().enumerate() {
        let country = if draws.variant.is_heterogeneous() {
            draws.countries[s].clone()
        } else {
            POOLED.to_string()
        };
        pointwise.push(vec![
            country,
            draws.causes[i].clone(),
            num(m.waic.pointwise[o]),
            num(m.loo.pointwise_elpd[o]),
            num(m.loo.pareto_k[o]),
            m.loo.high_k.contains(&o).to_string(),
        ]);
    }
    Ok((overall, pointwise))
}

fn diagnostics_table(d: &Diagnostics) -> Table {
    let mut t = Table::new(["parameter", "rhat", "ess_bulk"]);
    for p in &d.params {
        t.push(vec![p.name.clone(), opt_num(p.rhat), num(p.ess_bulk)]);
    }
    t
}

fn draws_table(draws: &PosteriorDraws) -> Table {
    let mut header: Vec<String> = ["chain", "draw", "lp", "divergent"].map(String::from).to_vec();
    header.extend(draws.names.iter().cloned());
    let mut t = Table::new(header);
    for (k, chain) in draws.chains.iter().enumerate() {
        for (d, values) in chain.values.iter().enumerate() {
            let mut row = vec![
                (k + 1).to_string(),
                (d + 1).to_string(),
                num(chain.lp[d]),
                chain.divergent[d].to_string(),
            ];
            row.extend(values.iter().map(|&v| num(v)));
            t.push(row);
        }
    }
    t
}

/// Reads a `draws.csv` dump back into per-chain draws.
pub fn read_draws(path: &Path) -> CliResult<(Vec<String>, Vec<ChainDraws>)> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| CliError::Parse(e.to_string()))?.clone();
    if header.len() < 4 || header.iter().take(4).ne(["chain", "draw", "lp", "divergent"]) {
        return Err(CliError::Parse(format!("{}: not a draw dump", path.display())));
    }
    let names: Vec<String> = header.iter().skip(4).map(String::from).collect();
    let mut chains: Vec<ChainDraws> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Parse(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| CliError::Parse(format!("{}: line {line}: bad {what}", path.display()));
        if rec.len() != header.len() {
            return Err(bad("field count"));
        }
        let chain: usize = rec[0].parse().map_err(|_| bad("chain"))?;
        if chain == 0 || chain > chains.len() + 1 {
            return Err(bad("chain"));
        }
        if chain == chains.len() + 1 {
            chains.push(ChainDraws {
                values: Vec::new(),
                loglik: Vec::new(),
                lp: Vec::new(),
                divergent: Vec::new(),
                accept_stat: Vec::new(),
                n_leapfrog: Vec::new(),
                step_size: f64::NAN,
                inv_metric: Vec::new(),
            });
        }
        let ch = &mut chains[chain - 1];
        ch.lp.push(rec[2].parse().map_err(|_| bad("lp"))?);
        ch.divergent.push(rec[3].parse().map_err(|_| bad("divergent"))?);
        let values = rec
            .iter()
            .skip(4)
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("value"))?;
        ch.values.push(values);
    }
    if chains.is_empty() {
        return Err(CliError::Parse(format!("{}: no draws", path.display())));
    }
    Ok((names, chains))
}

fn summarize_named(names: &[String], chains: &[ChainDraws]) -> CliResult<SummaryTable> {
    let rows = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = chains.iter().flat_map(|c| c.values.iter().map(move |v| v[k])).collect();
            summarize_column(name, &col)
        })
        .collect::<Result<_, _>>()?;
    Ok(SummaryTable { rows })
}

fn predict_table(draws: &PosteriorDraws, spec: &ModelSpec, countries: &[String], seed: u64) -> CliResult<Table> {
    let mut header = vec!["country".to_string()];
    header.extend(SUMMARY_HEADER.iter().map(|s| s.to_string()));
    let mut t = Table::new(header);
    let c = draws.causes.len();
    for (k, country) in countries.iter().enumerate() {
        let pred = predict_new_country(draws, spec, country, misclass_core::rng::derive_seed(seed, k as u64))?;
        for i in 0..c {
            for j in 0..c {
                let name = format!("phi[{},{}]", i + 1, j + 1);
                let row = summarize_column(&name, &pred.cell(i, j))?;
                t.push(summary_row(vec![country.clone(), name], &row));
            }
        }
    }
    Ok(t)
}

/// Result of a strict-mode check, `Err` when a threshold is exceeded.
fn strict_check(d: &Diagnostics) -> CliResult<()> {
    let mut problems = Vec::new();
    if let Some(r) = d.max_rhat() {
        if r > STRICT_RHAT {
            problems.push(format!("max R-hat {r:.4} > {STRICT_RHAT}"));
        }
    }
    let f = d.divergence_fraction();
    if f > STRICT_DIVERGENCE {
        problems.push(format!("{:.2}% divergent transitions > {}%", 100.0 * f, 100.0 * STRICT_DIVERGENCE));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Strict(problems.join("; ")))
    }
}

pub fn fit(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    cfg.validate()?;
    let (_, data, input) = require_input(cfg)?;
    let spec = ModelSpec::new(cfg.model, cfg.hyper.clone(), data.countries.clone(), data.counts.clone())?;
    let n_free = Model::new(spec.clone())?.dim();
    let (draws, diag) = sample(&spec, &cfg.sampler)?;

    let mut out = Outputs::new(out_dir)?;
    out.save("summary.csv", &summary_table(&summarize(&draws)?))?;
    out.save("matrices.csv", &cell_table(&draws)?)?;
    let (overall, pointwise) = comparison_tables(&draws)?;
    out.save("comparison.csv", &overall)?;
    out.save("pointwise.csv", &pointwise)?;
    out.save("diagnostics.csv", &diagnostics_table(&diag))?;
    out.save("odds.csv", &odds_table(&data, cfg.odds_threshold)?)?;
    if !cfg.predict.is_empty() {
        out.save("predict.csv", &predict_table(&draws, &spec, &cfg.predict, cfg.sampler.seed)?)?;
    }
    if cfg.dump_draws {
        out.save("draws.csv", &draws_table(&draws))?;
    }

    let mut manifest = Manifest::new("fit", cfg.sampler.seed, cfg);
    manifest.input = Some(input);
    manifest.model = Some(ModelInfo {
        variant: cfg.model,
        causes: data.causes.labels().to_vec(),
        countries: data.countries.clone(),
        n_free_parameters: n_free,
    });
    manifest.diagnostics = Some(RunDiagnostics::from(&diag));
    manifest.outputs = out.names.clone();
    manifest.save(out_dir)?;

    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    if cfg.strict {
        strict_check(&diag)?;
    }
    Ok(())
}

/// Predictions for new countries from a previous fit's directory, which
/// must hold `manifest.json` and a `draws.csv` dump.
/// Without `seed` the fit's seed is reused, which reproduces the fit's own
/// `predict.csv`.
pub fn predict(
    cfg: &RunConfig,
    fit_dir: &Path,
    countries: &[String],
    seed: Option<u64>,
    out_dir: &Path,
) -> CliResult<()> {
    if countries.is_empty() {
        return Err(CliError::Config("no --country given".into()));
    }
    let fit = Manifest::load(fit_dir)?;
    let model = fit
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{} does not describe a fit", fit_dir.display())))?;
    let draws_path = fit_dir.join("draws.csv");
    if !draws_path.exists() {
        return Err(CliError::Config(format!(
            "{} is missing; re-run the fit with --dump-draws",
            draws_path.display()
        )));
    }
    let (names, chains) = read_draws(&draws_path)?;
    let causes = misclass_core::CauseSet::new(model.causes.clone())?;
    let spec = ModelSpec::new_any_countries(
        model.variant,
        fit.config.hyper.clone(),
        model.countries.clone(),
        vec![CountMatrix::zeros(causes); model.countries.len()],
    )?;
    let draws = PosteriorDraws {
        variant: model.variant,
        causes: model.causes.clone(),
        countries: model.countries.clone(),
        names,
        observations: Vec::new(),
        chains,
    };
    let seed = seed.unwrap_or(fit.seed);
    let mut out = Outputs::new(out_dir)?;
    out.save("predict.csv", &predict_table(&draws, &spec, countries, seed)?)?;
    let mut manifest = Manifest::new("predict", seed, cfg);
    manifest.model = Some(model.clone());
    manifest.input = Some(InputInfo {
        path: draws_path.clone(),
        sha256: sha256_hex(&std::fs::read(&draws_path)?),
    });
    manifest.outputs = out.names.clone();
    manifest.save(out_dir)
}

pub fn diagnose_odds(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    cfg.validate()?;
    let (_, data, input) = require_input(cfg)?;
    let mut out = Outputs::new(out_dir)?;
    let table = odds_table(&data, cfg.odds_threshold)?;
    let flagged = table.rows.iter().filter(|r| r[5] == "true").count();
    out.save("odds.csv", &table)?;
    let mut manifest = Manifest::new("diagnose-odds", cfg.sampler.seed, cfg);
    manifest.input = Some(input);
    manifest.outputs = out.names.clone();
    manifest.save(out_dir)?;
    if flagged > 0 {
        eprintln!("{flagged} cause pairs have log-odds spread above {}", cfg.odds_threshold);
    }
    Ok(())
}

pub fn summarize_draws(cfg: &RunConfig, draws_path: &Path, out_dir: &Path) -> CliResult<()> {
    let (names, chains) = read_draws(draws_path)?;
    let mut out = Outputs::new(out_dir)?;
    out.save("summary.csv", &summary_table(&summarize_named(&names, &chains)?))?;
    let mut manifest = Manifest::new("summarize-draws", cfg.sampler.seed, cfg);
    manifest.input = Some(InputInfo {
        path: draws_path.to_path_buf(),
        sha256: sha256_hex(&std::fs::read(draws_path)?),
    });
    manifest.outputs = out.names.clone();
    manifest.save(out_dir)
}

fn mc(x: &McEstimate) -> [String; 3] {
    [num(x.mean), num(x.se), x.n.to_string()]
}

fn study_tables(study: &StudyResult) -> [(&'static str, Table); 4] {
    let mut reps = Table::new([
        "replication",
        "seed",
        "method",
        "waic",
        "waic_se",
        "loo_ic",
        "loo_se",
        "max_pareto_k",
        "n_high_k",
        "mse",
        "interval_score",
        "holdout_interval_score",
        "divergences",
        "max_rhat",
        "flagged",
    ]);
    for r in &study.results {
        reps.push(vec![
            (r.replication + 1).to_string(),
            r.seed.to_string(),
            r.method.to_string(),
            num(r.waic),
            num(r.waic_se),
            num(r.loo_ic),
            num(r.loo_se),
            num(r.max_pareto_k),
            r.n_high_k.to_string(),
            num(r.mse),
            num(r.interval_score),
            opt_num(r.holdout_interval_score),
            r.divergences.to_string(),
            opt_num(r.max_rhat),
            r.flagged.to_string(),
        ]);
    }
    let mut failures = Table::new(["replication", "seed", "method", "error"]);
    for f in &study.failures {
        failures.push(vec![
            (f.replication + 1).to_string(),
            f.seed.to_string(),
            f.method.to_string(),
            f.error.clone(),
        ]);
    }
    let mut methods = Table::new(["method", "metric", "mean", "mc_se", "n"]);
    for s in &study.summaries {
        let mut metrics = vec![
            ("waic", s.waic),
            ("loo_ic", s.loo_ic),
            ("mse", s.mse),
            ("interval_score", s.interval_score),
        ];
        if let Some(h) = s.holdout_interval_score {
            metrics.push(("holdout_interval_score", h));
        }
        for (name, est) in metrics {
            let mut row = vec![s.method.to_string(), name.to_string()];
            row.extend(mc(&est));
            methods.push(row);
        }
    }
    let mut cmp = Table::new(["method_a", "method_b", "metric", "mean_diff", "mc_se", "n", "a_wins"]);
    for p in &study.comparisons {
        for (name, est, wins) in [
            ("waic", p.waic_diff, p.waic_wins),
            ("loo_ic", p.loo_diff, p.loo_wins),
            ("interval_score", p.interval_score_diff, p.interval_score_wins),
        ] {
            let mut row = vec![p.a.to_string(), p.b.to_string(), name.to_string()];
            row.extend(mc(&est));
            row.push(wins.to_string());
            cmp.push(row);
        }
    }
    [
        ("replications.csv", reps),
        ("failures.csv", failures),
        ("methods.csv", methods),
        ("comparisons.csv", cmp),
    ]
}

pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> CliResult<StudyResult> {
    let scenario = &cfg.simulate;
    let study = run_study(scenario)?;
    let mut out = Outputs::new(out_dir)?;
    for (name, table) in study_tables(&study) {
        out.save(name, &table)?;
    }
    let mut manifest = Manifest::new("simulate", scenario.seed, cfg);
    manifest.truth_params = match scenario.truth_matrices {
        Some(_) => None,
        None => Some(scenario.truth_params()),
    };
    manifest.outputs = out.names.clone();
    manifest.save(out_dir)?;
    if !study.failures.is_empty() {
        eprintln!("warning: {} fits failed; see failures.csv", study.failures.len());
    }
    Ok(study)
}
