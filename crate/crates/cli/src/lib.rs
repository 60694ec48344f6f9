//! Config-driven experiment runner for `anisolab`.

pub mod artifacts;
pub mod config;
pub mod plot;
pub mod recipes;

use std::fs;
use std::path::{Path, PathBuf};

use anisolab::verify::BoundCheckReport;
use rayon::prelude::*;
use thiserror::Error;

pub use artifacts::{inspect, InspectReport};
pub use config::{ConfigError, ExperimentConfig};

pub const OUT_ENV: &str = "ANISOLAB_OUT";
pub const DEFAULT_OUT: &str = "anisolab-out";
pub const CONFIG_EXTENSION: &str = "conf";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] anisolab::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub reports: Vec<BoundCheckReport>,
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

/// Output root: `ANISOLAB_OUT` when set, else `./anisolab-out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

/// Parse, run and write one experiment. Nothing is written unless the
/// config parses and the recipe completes.
pub fn run_config_file(config: &Path, out: Option<&Path>) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(config)?;
    let cfg = ExperimentConfig::parse(&text)?;
    let dir = match (out, &cfg.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => default_out_root().join(stem(config)),
    };
    run_experiment(&cfg, &dir)
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    let output = recipes::run_recipe(cfg)?;
    let artifacts = artifacts::write_artifacts(cfg, &output, out_dir)?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), config_hash: cfg.hash(), reports: output.reports, artifacts })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: String,
    pub outcome: Result<RunSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub table: PathBuf,
}

impl SweepSummary {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.as_ref().is_ok_and(|s| s.all_passed()))
    }
}

pub const SWEEP_TABLE: &str = "sweep.csv";

/// Run every `*.conf` in `dir` on a pool of `workers` threads. Rows follow
/// file name order; a failing config yields an error row.
pub fn sweep(dir: &Path, out_root: &Path, workers: usize) -> Result<SweepSummary, CliError> {
    if workers == 0 {
        return Err(CliError::Other("--workers must be positive".into()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == CONFIG_EXTENSION))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Other(format!("no *.{CONFIG_EXTENSION} files in {}", dir.display())));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Other(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let name = stem(f);
                let outcome = fs::read_to_string(f)
                    .map_err(CliError::from)
                    .and_then(|t| Ok(ExperimentConfig::parse(&t)?))
                    .and_then(|cfg| run_experiment(&cfg, &out_root.join(&name)))
                    .map_err(|e| e.to_string());
                SweepRow { config: name, outcome }
            })
            .collect()
    });
    fs::create_dir_all(out_root)?;
    let table = out_root.join(SWEEP_TABLE);
    fs::write(&table, sweep_table(&rows)?)?;
    Ok(SweepSummary { rows, table })
}

pub fn sweep_table(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["config", "config_hash"];
    header.extend(artifacts::REPORT_HEADER);
    header.push("error");
    w.write_record(&header)?;
    for row in rows {
        match &row.outcome {
            Ok(s) => {
                for r in &s.reports {
                    let mut rec = vec![row.config.clone(), s.config_hash.clone()];
                    rec.extend(artifacts::report_row(r));
                    rec.push(String::new());
                    w.write_record(&rec)?;
                }
            }
            Err(e) => {
                let mut rec = vec![row.config.clone(), String::new()];
                rec.extend(std::iter::repeat(String::new()).take(artifacts::REPORT_HEADER.len()));
                rec.push(e.clone());
                w.write_record(&rec)?;
            }
        }
    }
    w.into_inner().map_err(|e| CliError::Other(e.to_string()))
}
