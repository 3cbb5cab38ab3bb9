//! Command implementations behind the `sumcap` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sumcap_core::experiments::{builtin_experiments, find_experiment, CARRIER_HZ};
use sumcap_core::harness::{run_experiment, Experiment, ExperimentResult};
use sumcap_core::report::{format_sig9, to_csv};
use thiserror::Error;

use crate::config::{render_scenario, ConfigError, ConfigFile};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown experiment `{0}` (try `sumcap list-experiments`)")]
    UnknownExperiment(String),
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sumcap_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::UnknownExperiment(_) | Self::Usage(_) => exit::USAGE,
            Self::Config { source: ConfigError::Parse { .. }, .. } => exit::USAGE,
            Self::Config { .. } | Self::Core(_) => exit::FAILURE,
            Self::Io { .. } => exit::IO,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

pub fn load_config(path: &Path) -> Result<Experiment, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    ConfigFile::parse(&text)
        .and_then(|c| c.to_experiment())
        .map_err(|source| CliError::Config { path: path.to_owned(), source })
}

/// Options of `sumcap run`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub experiments: Vec<String>,
    pub configs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub workers: usize,
    pub out: PathBuf,
}

/// Resolves the requested experiments with overrides applied.
pub fn resolve(opts: &RunOptions) -> Result<Vec<Experiment>, CliError> {
    let mut out = Vec::new();
    for name in &opts.experiments {
        out.push(find_experiment(name).ok_or_else(|| CliError::UnknownExperiment(name.clone()))?);
    }
    for path in &opts.configs {
        out.push(load_config(path)?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("nothing to run: pass --experiment or --config".into()));
    }
    for exp in &mut out {
        if let Some(seed) = opts.seed {
            exp.seed = seed;
        }
        if let Some(trials) = opts.trials {
            exp.trials = trials;
        }
        exp.validate()?;
    }
    Ok(out)
}

/// Deterministic run metadata in the configuration grammar, one block per
/// scenario.
pub fn render_metadata(exp: &Experiment, result: &ExperimentResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sumcap {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# experiment {}", exp.name);
    let _ = writeln!(out, "# seed {}", exp.seed);
    let _ = writeln!(out, "# trials {}", exp.trials);
    let _ = writeln!(out, "# carrier_hz {}", format_sig9(CARRIER_HZ));
    for (sc, failed) in exp.scenarios.iter().zip(&result.failed_trials) {
        let _ = writeln!(out, "\n# scenario {}", sc.label);
        let _ = writeln!(out, "# failed_trials {failed}");
        out.push_str(&render_scenario(&exp.name, exp.trials, exp.seed, sc));
    }
    out
}

/// Runs every experiment and writes `<name>.csv` and `<name>.meta`.
/// Returns the written paths.
pub fn cmd_run(opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let experiments = resolve(opts)?;
    fs::create_dir_all(&opts.out).map_err(io_error(&opts.out))?;
    let mut written = Vec::new();
    for exp in &experiments {
        let result = run_experiment(exp, opts.workers)?;
        let csv = opts.out.join(format!("{}.csv", exp.name));
        fs::write(&csv, to_csv(&result)).map_err(io_error(&csv))?;
        let meta = opts.out.join(format!("{}.meta", exp.name));
        fs::write(&meta, render_metadata(exp, &result)).map_err(io_error(&meta))?;
        written.push(csv);
        written.push(meta);
    }
    Ok(written)
}

/// Checks a configuration file; `Ok` carries every violation found.
pub fn cmd_validate(path: &Path) -> Result<Vec<String>, CliError> {
    match load_config(path) {
        Ok(_) => Ok(Vec::new()),
        Err(CliError::Config { source: ConfigError::Invalid(v), .. }) => Ok(v),
        Err(e) => Err(e),
    }
}

/// One line per built-in experiment.
pub fn list_experiments() -> String {
    let mut out = String::new();
    for exp in builtin_experiments() {
        let labels: Vec<&str> = exp.scenarios.iter().map(|s| s.label.as_str()).collect();
        let _ = writeln!(out, "{}\ttrials={}\t{}", exp.name, exp.trials, labels.join(","));
    }
    out
}
