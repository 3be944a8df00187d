mod compare;
mod config;
mod experiment;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use compare::Chains;
use config::{ConfigError, ExperimentConfig, Overrides};

/// Passive Langevin inverse reinforcement learning experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Paper,
}

impl Scale {
    fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a previous run's manifest.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: runs/<name>]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        /// Independent chains, run concurrently and pooled after burn-in.
        #[arg(long)]
        chains: Option<usize>,
        /// libsvm data file for the logistic problem.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Validate a config and print it with the scale and overrides applied.
    Check {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Per-marginal W1 and variational distances between two runs.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Read A's baseline chains instead of its sampler chains.
        #[arg(long)]
        baseline_a: bool,
        /// Read B's baseline chains instead of its sampler chains.
        #[arg(long)]
        baseline_b: bool,
        /// Also write compare.json and compare.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            scale,
            chains,
            data,
        } => {
            let overrides = Overrides { seed, chains, data };
            let cfg = ExperimentConfig::load(&config, scale.name(), &overrides)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
            let outcome = experiment::run(&cfg, scale.name(), &dir)?;
            match outcome.failure {
                None => emit(&outcome.dir.display().to_string()),
                Some(f) => Err(anyhow::anyhow!(
                    "run diverged, partial trajectories kept in {}: {f}",
                    outcome.dir.display()
                )),
            }
        }
        Command::Check { config, scale, data } => {
            let overrides = Overrides {
                data,
                ..Overrides::default()
            };
            let cfg = ExperimentConfig::load(&config, scale.name(), &overrides)?;
            emit(&serde_json::to_string_pretty(&cfg)?)
        }
        Command::Compare {
            dir_a,
            dir_b,
            baseline_a,
            baseline_b,
            out,
        } => {
            let which = |b: bool| if b { Chains::Baseline } else { Chains::Sampler };
            let cmp = compare::compare((&dir_a, which(baseline_a)), (&dir_b, which(baseline_b)), out.as_deref())?;
            emit(&serde_json::to_string_pretty(&cmp)?)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
