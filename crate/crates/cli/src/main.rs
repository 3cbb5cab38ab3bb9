use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sumcap_cli::{cmd_run, cmd_validate, exit, list_experiments, RunOptions};

/// Sum-capacity loss of linear precoding against dirty-paper coding in
/// Ricean multi-user MIMO downlinks.
#[derive(Debug, Parser)]
#[command(name = "sumcap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run experiments and write `<name>.csv` and `<name>.meta` per experiment.
    Run {
        /// Built-in experiment to run (repeatable); see `list-experiments`.
        #[arg(long = "experiment", short = 'e', value_name = "NAME")]
        experiments: Vec<String>,
        /// Configuration file describing an experiment (repeatable).
        #[arg(long = "config", short = 'c', value_name = "FILE")]
        configs: Vec<PathBuf>,
        /// Master seed, overriding the experiment's own.
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo trials per scenario, overriding the experiment's own.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; 0 uses every core. Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output directory, created if missing.
        #[arg(long, short = 'o', default_value = "results")]
        out: PathBuf,
    },
    /// Check a configuration file and list every violated constraint.
    Validate {
        /// Configuration file to check.
        config: PathBuf,
    },
    /// List the built-in experiments with their scenarios.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { experiments, configs, seed, trials, workers, out } => {
            let opts = RunOptions { experiments, configs, seed, trials, workers, out };
            match cmd_run(&opts) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    exit::OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Validate { config } => match cmd_validate(&config) {
            Ok(v) if v.is_empty() => {
                println!("{}: ok", config.display());
                exit::OK
            }
            Ok(v) => {
                for msg in v {
                    println!("{msg}");
                }
                exit::FAILURE
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::ListExperiments => {
            print!("{}", list_experiments());
            exit::OK
        }
    };
    ExitCode::from(code as u8)
}
