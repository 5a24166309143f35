//! `artret`: corpus splitting, vocabulary building, training, evaluation and
//! retrieval for artwork image/text collections.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Settings;

#[derive(Parser)]
#[command(name = "artret", version, about = "Cross-modal retrieval for artwork collections")]
struct Cli {
    /// TOML file with default values for any flag (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus (metadata CSV plus feature file).
    Synth(SynthArgs),
    /// Partition the metadata into train/val/test manifests.
    Split(SplitArgs),
    /// Build comment and title vocabularies from the training split.
    BuildVocab(VocabArgs),
    /// Train a CCA, CML or AMD model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a split, or report the random baseline.
    Evaluate(EvalArgs),
    /// Rank the collection for a free-text query or an image id.
    Retrieve(RetrieveArgs),
}

#[derive(Args, Clone, Default)]
pub struct DataArgs {
    /// Metadata CSV.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Visual feature file (SEMF).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Directory holding train.txt, val.txt and test.txt.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Directory holding comments.vocab and titles.vocab (defaults to --splits).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Output directory for the manifests.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validation and test fractions.
    #[arg(long, default_value_t = 0.05)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    pub test_fraction: f64,
}

#[derive(Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Keep at most this many comment terms.
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    /// Minimum number of training comments a term must appear in.
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Output directory (defaults to --splits).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// cca, cml or amd.
    #[arg(long)]
    pub model: Option<String>,
    /// bow or mlp text encoder.
    #[arg(long)]
    pub arch: Option<String>,
    /// Attribute supervising AMD: type, school, timeframe or author.
    #[arg(long)]
    pub attribute: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stop after this many epochs without validation improvement (0 disables).
    #[arg(long)]
    pub patience: Option<usize>,
    /// CCA covariance ridge.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for model.ckpt and history.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Report the uniform-random scorer instead of a model.
    #[arg(long)]
    pub random_baseline: bool,
    /// Items per simulated ranking (defaults to the test split size, or 1069).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Also run the pick-the-painting task: easy or difficult.
    #[arg(long)]
    pub pool: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for report.csv and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Free-text query; ranks images.
    #[arg(long, conflicts_with = "image")]
    pub query: Option<String>,
    /// Sample id or image reference; ranks texts.
    #[arg(long)]
    pub image: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Collection to rank: train, val, test or all.
    #[arg(long, default_value = "all")]
    pub gallery: String,
}

/// Failure classes with distinct exit codes.
pub enum Failure {
    /// Bad flags, configuration or missing inputs (exit 2).
    Usage(anyhow::Error),
    /// Anything that goes wrong while running (exit 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<artret_core::Error> for Failure {
    fn from(e: artret_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let settings = match cli.config.as_deref().map(Settings::load).transpose() {
        Ok(s) => s.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a, &settings),
        Command::Split(a) => commands::split(a, &settings),
        Command::BuildVocab(a) => commands::build_vocab(a, &settings),
        Command::Train(a) => commands::train(a, &settings),
        Command::Evaluate(a) => commands::evaluate(a, &settings),
        Command::Retrieve(a) => commands::retrieve(a, &settings),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
