//! `transflow` command-line front end.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use transflow::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] transflow::Error),
}

impl CliError {
    /// 2 usage, 3 data or format, 4 numerical.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "transflow",
    version,
    about = "Flow-based latent Bayesian inference and few-shot classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a flow by maximum likelihood and write a checkpoint
    Train(TrainArgs),
    /// Condition the latent prior on evidence and write a posterior file
    Condition(ConditionArgs),
    /// Draw samples from the prior or a posterior, as a PGM grid or CSV
    Sample(SampleArgs),
    /// Interpolate between two posterior files
    Interpolate(InterpolateArgs),
    /// Few-shot classification with k-NN baselines on the same support set
    Classify(ClassifyArgs),
    /// Print metadata of a checkpoint, posterior, bank or IDX file
    Inspect(InspectArgs),
    /// Write a synthetic dataset
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preprocess {
    /// logit for IDX images, standardize for CSV
    Auto,
    Identity,
    Standardize,
    Logit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training data (.csv, or IDX images, optionally gzipped)
    #[arg(long)]
    pub data: PathBuf,
    /// CSV rows end with an integer label column (dropped for training)
    #[arg(long)]
    pub labeled: bool,
    #[arg(long, value_enum, default_value_t = Preprocess::Auto)]
    pub preprocess: Preprocess,
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    /// Conditioner width [default: max(64, 4d)]
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
    pub optimizer: Optimizer,
    /// Global gradient-norm clip (0 disables)
    #[arg(long, default_value_t = 10.0)]
    pub clip: f64,
    /// Uniform dequantization amplitude [default: 1 with logit, else 0]
    #[arg(long)]
    pub dequant: Option<f64>,
    #[arg(long, env = "TFLW_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch NLL log [default: <out>.nll.csv]
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "lambda_choice", multiple = false)]
pub struct LambdaArgs {
    /// Absolute likelihood variance λ
    #[arg(long, group = "lambda_choice")]
    pub lambda: Option<f64>,
    /// λ as a fraction of m [default: 0.5]
    #[arg(long, group = "lambda_choice")]
    pub lambda_fraction: Option<f64>,
}

#[derive(Args)]
pub struct ConditionArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Evidence points (.csv or IDX images)
    #[arg(long)]
    pub evidence: PathBuf,
    /// IDX label file for the evidence
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Evidence CSV rows end with a label column
    #[arg(long)]
    pub labeled: bool,
    /// Keep only evidence with this label
    #[arg(long)]
    pub class: Option<i64>,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    /// One-row CSV of per-dimension likelihood variances (general posterior)
    #[arg(long, conflicts_with = "lambda_choice")]
    pub likelihood_diag: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the posterior predictive here
    #[arg(long)]
    pub predictive_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sample from this posterior instead of the prior
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, requires = "grid_cols")]
    pub grid_rows: Option<usize>,
    #[arg(long, requires = "grid_rows")]
    pub grid_cols: Option<usize>,
    #[arg(long, env = "TFLW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output path; .pgm writes an image grid, anything else CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Number of points from a to b, endpoints included
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write samples per step through this flow
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 8, requires = "checkpoint")]
    pub samples_per_step: usize,
    #[arg(long, env = "TFLW_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Pixel,
    Latent,
    None,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled support pool (.csv with label column, or IDX images)
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long)]
    pub support_labels: Option<PathBuf>,
    /// Labeled test set
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Support examples drawn per class
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Baseline::Pixel, Baseline::Latent])]
    pub baselines: Vec<Baseline>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, env = "TFLW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// JSON report with every method
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fitted classifier bank
    #[arg(long)]
    pub bank_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub file: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    TwoMoons,
    BlobImages,
    Digits,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Synthetic,
    /// Points (two-moons, blob-images) or images per class (digits)
    #[arg(long)]
    pub n: usize,
    /// Two-moons noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Image side length
    #[arg(long, default_value_t = 8)]
    pub side: usize,
    #[arg(long, env = "TFLW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output path; .csv writes CSV (labels last), anything else IDX images
    #[arg(long)]
    pub out: PathBuf,
    /// IDX label file (image kinds with labels)
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Condition(a) => commands::condition(a),
        Command::Sample(a) => commands::sample(a),
        Command::Interpolate(a) => commands::interpolate(a),
        Command::Classify(a) => commands::classify(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
