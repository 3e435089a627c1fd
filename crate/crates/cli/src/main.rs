//! Command-line front end for the random entire function laboratory.
//!
//! Exit codes: 0 on success, 1 when an experiment's invariant or an
//! acceptance criterion fails, 2 on configuration errors, 3 on numerical
//! failures during a run.

mod config;
mod experiments;
mod verify;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ExperimentConfig, ExperimentKind};
use experiments::RunError;
use verify::ProfileKind;

#[derive(Parser)]
#[command(name = "entirelab", version, about = "numerical experiments on random entire functions")]
struct Cli {
    /// Experiment to run; overrides the config file.
    #[arg(long, value_enum)]
    experiment: Option<ExperimentKind>,

    /// TOML configuration file; every field is optional and defaulted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// RNG seed; overrides the config file (config default: 0).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads, 0 = automatic; identical output either way.
    #[arg(long)]
    threads: Option<usize>,

    /// Output directory; overrides the config file.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Acceptance profile for the verify experiment.
    #[arg(long, value_enum, default_value = "quick")]
    profile: ProfileKind,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("config error: cannot read {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match ExperimentConfig::from_toml(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        None => ExperimentConfig::default(),
    };
    if let Some(x) = cli.experiment {
        cfg.experiment = x;
    }
    if let Some(x) = cli.seed {
        cfg.seed = x;
    }
    if let Some(x) = cli.threads {
        cfg.threads = x;
    }
    if let Some(x) = &cli.output_dir {
        cfg.output_dir = x.to_string_lossy().into_owned();
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }

    let outcome = if cfg.experiment == ExperimentKind::Verify {
        verify::run_verify(cli.profile, &cfg)
    } else {
        experiments::run(&cfg)
    };
    match outcome {
        Ok(out) => {
            println!("wrote {}", out.csv_path.display());
            println!("wrote {}", out.summary_path.display());
            if out.pass {
                println!("result: pass");
                ExitCode::SUCCESS
            } else {
                println!("result: FAIL");
                ExitCode::from(1)
            }
        }
        Err(RunError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
