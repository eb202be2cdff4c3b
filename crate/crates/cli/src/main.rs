//! `skirent`: ski-rental policies from distributional predictions.
//!
//! Results go to stdout (or `--out`), logs to stderr. Exit status is 0 on success,
//! 1 when a computation or verification fails and 2 on usage or configuration errors.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use config::{RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "skirent", version, about = "Robust ski-rental policies from distributional predictions")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; flags take precedence over its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Buy cost in rental days (at least 2).
    #[arg(long, global = true)]
    b: Option<u64>,
    /// Target robustness ratio (above 1).
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Trust in the prediction, in (0, 1].
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Water-level search tolerance.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true, env = "SKIRENT_SEED")]
    seed: Option<u64>,
    /// Predicted distribution: inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    dist: Option<String>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Suppress log output.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Wasserstein,
    Tv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Majority,
    Mixture,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExperimentKind {
    Table,
    Sweep,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal buy threshold for the prediction, clamped when --lambda is given.
    Threshold {
        /// Prediction error budget for the bound report.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, value_enum, default_value = "wasserstein")]
        metric: MetricArg,
    },
    /// Clamped threshold and its robustness/consistency guarantee.
    Clamp {
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, value_enum, default_value = "wasserstein")]
        metric: MetricArg,
    },
    /// Water-filling randomized policy, checked for robustness.
    Waterfill,
    /// Trust-parameter baseline policy.
    Baseline {
        #[arg(long, value_enum, default_value = "mixture")]
        kind: BaselineArg,
    },
    /// Consistency table or perturbation sweep.
    Experiment {
        #[arg(value_enum)]
        which: ExperimentKind,
        /// Comma-separated error levels for the sweep.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Cross-check solvers against exhaustive and LP oracles.
    Verify {
        /// Only compare the point-prediction solution against the LP.
        #[arg(long)]
        onehot: bool,
        /// Check a policy file for robustness instead of running the grid.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Distances, optimal cost and policy scores.
    Metrics {
        /// Second distribution to compare against --dist.
        #[arg(long)]
        truth: Option<String>,
        /// Policy file to score under --dist.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
}

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

pub type Outcome<T = ()> = Result<T, Failure>;

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<skirent_core::Error> for Failure {
    fn from(e: skirent_core::Error) -> Self {
        Failure::Compute(e.into())
    }
}

pub trait UsageContext<T> {
    fn usage(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> UsageContext<T> for Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.common.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::default(),
    };
    let mut settings = Settings::merge(&cli.common, file);
    if settings.format == Format::Csv && !matches!(cli.command, Command::Experiment { .. }) {
        return Err(Failure::Usage(anyhow::anyhow!("--format csv is only available for experiment")));
    }
    match cli.command {
        Command::Threshold { eta, metric } => commands::threshold(&settings, eta, metric),
        Command::Clamp { eta, metric } => commands::clamp(&settings, eta, metric),
        Command::Waterfill => commands::waterfill(&settings),
        Command::Baseline { kind } => commands::baseline(&settings, kind),
        Command::Experiment { which, etas, trials } => {
            settings.etas = etas.or(settings.etas.take());
            settings.trials = trials.or(settings.trials);
            commands::experiment(&settings, which)
        }
        Command::Verify { onehot, policy } => verify::run(&settings, onehot, policy.as_deref()),
        Command::Metrics { truth, policy } => commands::metrics(&settings, truth.as_deref(), policy.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.quiet { log::LevelFilter::Off } else { log::LevelFilter::Info };
    let mut logger = env_logger::Builder::new();
    logger.filter_level(level);
    if !cli.common.quiet {
        logger.parse_default_env();
    }
    logger.init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            Cli::command().error(ErrorKind::InvalidValue, format!("{e:#}")).exit();
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
