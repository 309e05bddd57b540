use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use coe_core::dataset::{load_dataset, save_dataset, simulate_trial, write_dataset, Dataset, IngestConfig, SimulationConfig};
use coe_core::model_space::{enumerate_posterior, mh_sample, PosteriorTable, SearchOptions};
use coe_core::report::{
    build_report, diagnostic_rows, write_diagnostics_csv, write_hypergeom_grid, Report,
    ReportOptions, SearchMode,
};
use coe_core::likelihood::BetaPrior;
use log::info;
use serde::Serialize;

use crate::config::{AnalysisArgs, AnalysisConfig};
use crate::error::CliError;

fn load(config: &AnalysisConfig) -> Result<Dataset, CliError> {
    let ingest = IngestConfig { cardinalities: config.cardinalities.clone(), ..Default::default() };
    let data = load_dataset(&config.data, &ingest, config.target.clone())?;
    info!("loaded {} records with {} covariates from {}", data.len(), data.k(), config.data.display());
    Ok(data)
}

fn search(data: &Dataset, config: &AnalysisConfig, mode: SearchMode) -> Result<PosteriorTable, CliError> {
    let table = match mode {
        SearchMode::Enumerate => {
            let options = SearchOptions { beta_prior: BetaPrior::UNIFORM, exhaustive_cap: config.exhaustive_cap };
            info!("enumerating {} models", 1u128 << data.k());
            enumerate_posterior(data, config.prior, &options)?
        }
        SearchMode::Mh => {
            config.mcmc.validate()?;
            info!(
                "sampling {} chains of {} steps (burn-in {}), seed {}",
                config.mcmc.chains, config.mcmc.iterations, config.mcmc.burn_in, config.mcmc.seed
            );
            mh_sample(data, config.prior, &config.mcmc, BetaPrior::UNIFORM)?
        }
    };
    info!("posterior support: {} models", table.support_size());
    Ok(table)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path.display(), e))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    match out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(path.display(), e))
        }
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e)),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into())
}

fn summary(report: &Report) -> String {
    let best = &report.best;
    let selected = if best.selected.is_empty() {
        "(none)".to_string()
    } else {
        best.selected.iter().map(|s| format!("{}={}", s.name, s.level)).collect::<Vec<_>>().join(", ")
    };
    let g = &best.group_sizes;
    format!(
        "n = {}, k = {}, {} models with positive posterior\n\
         best model {} (posterior {:.4}): {}\n\
         RR = {}, PC lower bound = {}\n\
         group sizes: a11 {}, abar11 {}, a01 {}, a00 {}, abar0 {}\n",
        report.dataset.n,
        report.dataset.k,
        report.search.support_size,
        best.model,
        best.posterior,
        selected,
        fmt_opt(best.rr),
        fmt_opt(best.pc_lower),
        g.a11.n,
        g.abar11.n,
        g.a01.n,
        g.a00.n,
        g.abar0.n,
    )
}

fn report_for(args: AnalysisArgs, forced: Option<SearchMode>) -> Result<(Report, AnalysisConfig), CliError> {
    let config = args.resolve()?;
    let mode = forced.unwrap_or(config.search);
    let data = load(&config)?;
    let table = search(&data, &config, mode)?;
    let options = ReportOptions {
        estimator: config.estimator,
        top: config.top,
        mode,
        prior: config.prior,
        mcmc: (mode == SearchMode::Mh).then_some(config.mcmc),
    };
    Ok((build_report(&data, &table, &options), config))
}

/// Full pipeline. The JSON report goes to `--out` with a short summary on
/// stdout, or to stdout when no output file is given.
pub fn analyze(args: AnalysisArgs, forced: Option<SearchMode>) -> Result<(), CliError> {
    let (report, config) = report_for(args, forced)?;
    write_json(&report, config.out.as_deref())?;
    if let Some(path) = &config.out {
        print!("{}", summary(&report));
        println!("report written to {}", path.display());
    }
    Ok(())
}

pub fn figure_diagnostics(args: AnalysisArgs) -> Result<(), CliError> {
    let config = args.resolve()?;
    let data = load(&config)?;
    let table = search(&data, &config, config.search)?;
    let rows = diagnostic_rows(&data, &table, config.estimator);
    match &config.out {
        Some(path) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => {
            write_json(&rows, Some(path))
        }
        Some(path) => write_diagnostics_csv(&rows, create(path)?).map_err(|e| CliError::io(path.display(), e)),
        None => write_diagnostics_csv(&rows, io::stdout().lock()).map_err(|e| CliError::io("stdout", e)),
    }
}

pub fn figure_hypergeom(n00: u64, n01: u64, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => write_hypergeom_grid(n00, n01, create(&path)?).map_err(|e| CliError::io(path.display(), e)),
        None => write_hypergeom_grid(n00, n01, io::stdout().lock()).map_err(|e| CliError::io("stdout", e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Fourteen binary characteristics of a student cohort.
    StudentCohort,
}

pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub target_out: Option<PathBuf>,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut config = match (&args.config, args.preset) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --config or --preset, not both".into())),
        (Some(path), None) => {
            let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
            serde_json::from_str::<SimulationConfig>(&raw)
                .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))?
        }
        (None, Some(Preset::StudentCohort)) | (None, None) => SimulationConfig::student_cohort(161),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    let seed = args.seed.unwrap_or(config.seed);
    let data = simulate_trial(&config, seed)?;
    info!("simulated {} records with seed {seed}", data.len());
    match &args.out {
        Some(path) => save_dataset(&data, path)?,
        None => write_dataset(&data, io::stdout().lock())?,
    }
    if let Some(path) = &args.target_out {
        write_json(data.target(), Some(path))?;
    }
    Ok(())
}
