//! `ropesat` command-line pipeline.
//!
//! Exit status: 0 on success, 1 for invalid arguments, configuration or
//! input data, 2 when a valid job fails while running.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const THREADS_VAR: &str = "SPECTRA_SAT_THREADS";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "failed: {m}"),
        }
    }
}

impl From<ropesat::Error> for CliError {
    fn from(e: ropesat::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "ropesat", version, about = "Explainable infrared spectral classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Clone, Default)]
pub struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort.
    Synth(commands::SynthArgs),
    /// Crop, SNV and second derivative.
    Preprocess(commands::DataArgs),
    /// Same-class Mixup augmentation.
    Augment(commands::AugmentArgs),
    /// Train on an 80/20 hold-out split and save a checkpoint.
    Train(commands::TrainArgs),
    /// Cross-validate and report per-fold and aggregate metrics.
    Eval(commands::EvalArgs),
    /// Grad-CAM class maps and band overlap ratios.
    Explain(commands::ExplainArgs),
    /// Principal component projection.
    Pca(commands::PcaArgs),
    /// Render a report to SVG.
    Plot(commands::PlotArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Validation(format!("{THREADS_VAR} must be a non-negative integer, got `{raw}`"))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Augment(a) => commands::augment(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Explain(a) => commands::explain(a),
        Command::Pca(a) => commands::pca(a),
        Command::Plot(a) => commands::plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            eprint!("{}", e.render());
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ropesat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
