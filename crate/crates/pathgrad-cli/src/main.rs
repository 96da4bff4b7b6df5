//! Command-line surface: load models and inputs, run attribution and the
//! evaluation protocols, and write heatmaps, CSV curves, and text reports.
//!
//! Every command is reproducible: identical flags and seed produce
//! byte-identical output files. Exit code 2 flags usage errors (bad flags,
//! unknown subcommands or dataset tags; clap handles these); exit code 1
//! flags data errors (unreadable files, malformed models, shape problems).

mod commands;
mod inputs;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pathgrad",
    about = "Feature attribution over counterfactual scaling paths",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attribute a prediction to the input coordinates.
    Attribute(AttributeArgs),
    /// Per-α interior-gradient heatmaps plus the importance trend.
    Interior(InteriorArgs),
    /// Measurement protocols over models and generated corpora.
    #[command(subcommand)]
    Evaluate(EvaluateCmd),
    /// Train a toy model on a synthetic dataset and save it.
    Train(TrainArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Grad,
    Ig,
    Deeplift,
    Lrp,
    Deconvnet,
    Guided,
}

#[derive(Args)]
pub struct AttributeArgs {
    /// Model file to explain.
    #[arg(long)]
    pub model: PathBuf,
    /// Input: PGM/PPM image, feature CSV, or token list (LSTM models).
    #[arg(long)]
    pub input: PathBuf,
    /// Baseline input of the same kind; defaults to the zero tensor.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ig")]
    pub method: Method,
    /// Riemann steps for integrated gradients.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Stabilizer for --method lrp.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Reference input file for --method deeplift; defaults to zeros.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Class to attribute for classifier heads; defaults to the predicted
    /// class.
    #[arg(long)]
    pub class: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct InteriorArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Comma-separated α values in [0,1]; defaults to the standard grid.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand)]
pub enum EvaluateCmd {
    /// Score of the top class along the scaling path.
    Saturate(SaturateArgs),
    /// Pixel-ablation curves (integrated gradients vs plain gradients)
    /// over a generated patch-image corpus.
    Aopc(AopcArgs),
    /// In-box attribution fraction over a generated corpus with the
    /// eligibility filters applied.
    Localize(LocalizeArgs),
    /// Completeness gap as the Riemann step count grows.
    Converge(ConvergeArgs),
    /// Attributions per method across the shipped equivalent pair.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct SaturateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Read the softmax output itself or its pre-activation.
    #[arg(long, value_enum, default_value = "output")]
    pub tap: TapArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TapArg {
    Output,
    Presoftmax,
}

#[derive(Args)]
pub struct AopcArgs {
    /// Trained patch-classifier model.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of eligible images to average over.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Ablation steps.
    #[arg(long, default_value_t = 16)]
    pub ablation_steps: usize,
    /// Pixels zeroed per step.
    #[arg(long, default_value_t = 4)]
    pub pixels_per_step: usize,
    /// Riemann steps for the integrated-gradients ranking.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Score one user image instead of a generated corpus; requires
    /// --boxes.
    #[arg(long, requires = "boxes")]
    pub input: Option<PathBuf>,
    /// Sidecar file of ground-truth boxes, one `x0 y0 x1 y1` per line.
    #[arg(long, requires = "input")]
    pub boxes: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Minimum score drop when the box is blacked out (eligibility).
    #[arg(long, default_value_t = 0.1)]
    pub min_drop: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Strictly increasing list of Riemann step counts.
    #[arg(long, value_delimiter = ',', default_values_t = [20usize, 100, 400])]
    pub m_list: Vec<usize>,
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Riemann steps for the integrated-gradients column.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetTag {
    /// 2D Gaussian blobs + logistic model.
    Blobs,
    /// Object-patch images + small convnet.
    Patches,
    /// Token-repetition corpus + LSTM language model.
    Copytokens,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetTag,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the dataset's default epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override the dataset's default learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Attribute(args) => commands::attribute(&args),
        Command::Interior(args) => commands::interior(&args),
        Command::Evaluate(cmd) => match cmd {
            EvaluateCmd::Saturate(args) => commands::saturate(&args),
            EvaluateCmd::Aopc(args) => commands::aopc_cmd(&args),
            EvaluateCmd::Localize(args) => commands::localize(&args),
            EvaluateCmd::Converge(args) => commands::converge(&args),
            EvaluateCmd::Compare(args) => commands::compare(&args),
        },
        Command::Train(args) => commands::train(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
