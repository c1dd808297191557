//! Experiment runner for the `gou-core` verification suites.

pub mod config;
pub mod suites;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use gou_core::StreamKey;

pub use config::{ConfigError, ExperimentConfig, Suite};
use suites::{run_suite, SuiteError, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },

    #[error("refused: {0}")]
    Hypothesis(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] gou_core::GouError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Hypothesis(_) => 3,
            _ => 4,
        }
    }
}

/// Options of `gou run`; each one overrides the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run a bundled preset instead of a config file (needs --seed).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of paths per estimate.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub grid_dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// duality | inverse-flow | ruin | stationary | monotonicity | all
    #[arg(long)]
    pub suite: Option<Suite>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::parse(&text).map_err(|source| CliError::Config {
        path: path.display().to_string(),
        source,
    })
}

/// The config a run would use, with command-line overrides applied.
pub fn effective_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("--preset needs an explicit --seed".into()))?;
            ExperimentConfig::for_preset(name, seed)
        }
        (None, None) => return Err(CliError::Usage("give --config PATH or --preset NAME".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.paths {
        cfg.n_paths = n;
    }
    if let Some(dt) = args.grid_dt {
        cfg.grid_dt = dt;
    }
    if let Some(suite) = args.suite {
        cfg.suite = suite;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    cfg.validate().map_err(|source| CliError::Config {
        path: "command line".into(),
        source,
    })?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRecord {
    pub suite: Suite,
    pub model: String,
    pub status: Status,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    pub metrics: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub suite: Suite,
    pub pass: bool,
    pub seed: u64,
    pub config_hash: String,
    pub results: Vec<SuiteRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Summary,
    pub out_dir: PathBuf,
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Other(e.into()))?;
    w.write_record(&table.headers).map_err(|e| CliError::Other(e.into()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::Other(e.into()))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs every selected suite on every model and writes the CSV tables and
/// `summary.json` to the output directory. Under `suite = "all"` suites whose
/// hypotheses fail are skipped; a single selected suite is refused instead.
pub fn run(args: &RunArgs) -> Result<RunReport, CliError> {
    let cfg = effective_config(args)?;
    let models = cfg.resolved_models().map_err(|source| CliError::Config {
        path: "config".into(),
        source,
    })?;
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("gou-out"));
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Other(e.into()))?;
    let key = StreamKey::new(cfg.seed);
    let single = cfg.suite != Suite::All;
    let mut results = Vec::new();
    for m in &models {
        for suite in cfg.suite.expand() {
            let k = key.fork(&m.label).fork(suite.name());
            let outcome = pool.install(|| run_suite(suite, m, &cfg, k));
            let record = match outcome {
                Ok(o) => {
                    let file = format!("{}-{}.csv", suite.name(), m.label);
                    write_csv(&out_dir.join(&file), &o.table)?;
                    SuiteRecord {
                        suite,
                        model: m.label.clone(),
                        status: if o.pass { Status::Pass } else { Status::Fail },
                        pass: o.pass,
                        reason: None,
                        csv: Some(file),
                        metrics: o.metrics,
                    }
                }
                Err(SuiteError::Refused(reason)) if single => {
                    return Err(CliError::Hypothesis(format!("{} on `{}`: {reason}", suite, m.label)));
                }
                Err(SuiteError::Refused(reason)) => SuiteRecord {
                    suite,
                    model: m.label.clone(),
                    status: Status::Skipped,
                    pass: true,
                    reason: Some(reason),
                    csv: None,
                    metrics: BTreeMap::new(),
                },
                Err(SuiteError::Failed(e)) => return Err(e.into()),
            };
            results.push(record);
        }
    }
    let summary = Summary {
        schema_version: config::SCHEMA_VERSION,
        suite: cfg.suite,
        pass: results.iter().all(|r| r.pass),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        results,
    };
    let path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Other(e.into()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    Ok(RunReport { summary, out_dir })
}
