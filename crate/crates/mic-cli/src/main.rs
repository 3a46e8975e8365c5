//! `mic` — train, evaluate, and inspect the CNN image classifiers.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<mic_core::Error> for CliError {
    fn from(e: mic_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Parser)]
#[command(
    name = "mic",
    about = "From-scratch CNN training engine for 3-class medical-style image classification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic three-class dataset (blob / stripes / checker).
    GenSynth(GenSynthArgs),
    /// Train a model on a dataset directory and write run artifacts.
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Classify one image with a trained checkpoint.
    Predict(PredictArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Images per class.
    #[arg(long)]
    per_class: usize,
    /// Square image size in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root containing train/<CLASS>/ subdirectories.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Architecture: ccnn or cnn.
    #[arg(long)]
    arch: Option<String>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for history.csv, curves.svg, best.micf, run.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Square input size.
    #[arg(long)]
    size: Option<usize>,
    /// Input channels (1 or 3).
    #[arg(long)]
    channels: Option<usize>,
    /// Comma-separated conv filter counts, e.g. 8,16,32,64.
    #[arg(long, value_delimiter = ',')]
    filters: Option<Vec<usize>>,
    /// Dense layer width.
    #[arg(long)]
    dense_width: Option<usize>,
    /// Maximum training epochs.
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Base learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Multiplicative LR decay factor.
    #[arg(long)]
    lr_decay_factor: Option<f64>,
    /// Apply the decay every N epochs.
    #[arg(long)]
    lr_decay_every: Option<u32>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    patience: Option<u32>,
    /// Minimum validation-loss improvement.
    #[arg(long)]
    min_delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Validation fraction of the training set.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Disable training-time augmentation.
    #[arg(long)]
    no_augment: bool,
    /// Prefetch depth (0 disables the producer thread).
    #[arg(long)]
    prefetch: Option<usize>,
    /// Record the determinism switch in run.json (results are
    /// bit-reproducible either way).
    #[arg(long)]
    deterministic: Option<bool>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset root.
    #[arg(long)]
    data: PathBuf,
    /// Which split to evaluate: test (default) or train.
    #[arg(long, default_value = "test")]
    split: String,
    /// Emit machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Batch size for evaluation.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Image file (PGM or PNG).
    #[arg(long)]
    image: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Check a single layer (repeatable); see --help for names.
    #[arg(long = "layer")]
    layers: Vec<String>,
    /// Check every layer (the default when no --layer is given).
    #[arg(long)]
    all: bool,
    /// Also run the end-to-end miniature-model check.
    #[arg(long)]
    e2e: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynth(args) => commands::gen_synth(args),
        Command::Train(args) => commands::train(*args),
        Command::Eval(args) => commands::eval(args),
        Command::Predict(args) => commands::predict(args),
        Command::Gradcheck(args) => commands::gradcheck(args),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `mic <command> --help` for usage.");
            std::process::exit(2);
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
