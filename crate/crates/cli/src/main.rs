//! `ssnet`: synthesize data, train, stream, evaluate and inspect models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ssnet", version, about = "Online skeleton action prediction with temporal scale selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic annotated dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Run online inference and write per-frame predictions.
    Stream(StreamArgs),
    /// Score prediction files against annotations.
    Eval(EvalArgs),
    /// Print a checkpoint's architecture and parameter counts.
    Inspect(InspectArgs),
    /// Average the probability vectors of several prediction runs.
    Fuse(FuseArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration; its `[synth]` section supplies defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Action classes, blank excluded.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub streams: Option<usize>,
    /// Frames per stream.
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inclusive instance duration range, `LO,HI`.
    #[arg(long, value_parser = parse_pair)]
    pub duration: Option<(usize, usize)>,
    /// Inclusive blank gap range, `LO,HI`.
    #[arg(long, value_parser = parse_pair)]
    pub gap: Option<(usize, usize)>,
    /// Gaussian coordinate noise in meters.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Skeleton topology document (defaults to the 25-joint skeleton).
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint directory to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Layer policy during training: `ssnet` or `fsnet:S`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Regress raw frame distances instead of normalised ones.
    #[arg(long)]
    pub raw_distance: bool,
    /// Skeleton topology (defaults to the dataset's, else 25 joints).
    #[arg(long)]
    pub topology: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StreamArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Single frame file (`.frames.jsonl`).
    #[arg(long, conflicts_with = "data")]
    pub input: Option<PathBuf>,
    /// Annotation file for `--input` (needed by `ssnet-gt`).
    #[arg(long, requires = "input")]
    pub annotations: Option<PathBuf>,
    /// Dataset directory: every stream is processed.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Prediction CSV for `--input`, or output directory for `--data`.
    #[arg(long)]
    pub out: PathBuf,
    /// `ssnet`, `fsnet:S` or `ssnet-gt`.
    #[arg(long, default_value = "ssnet")]
    pub mode: String,
    /// Also time the naive full-window recompute path.
    #[arg(long)]
    pub bench: bool,
    /// `f32` or `f64`.
    #[arg(long, default_value = "f32")]
    pub precision: String,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset directory with annotations.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of `{stream}.preds.csv` files.
    #[arg(long, required_unless_present = "compare")]
    pub preds: Option<PathBuf>,
    /// Two prediction directories to compare side by side.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub compare: Option<Vec<PathBuf>>,
    /// Observation ratios in percent.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<u32>>,
    /// Ratios for the regression error.
    #[arg(long, value_delimiter = ',')]
    pub regression_ratios: Option<Vec<u32>>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write `metric,ratio,value` rows here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// List every tensor.
    #[arg(long)]
    pub tensors: bool,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    /// Prediction directories (or files) to fuse; all must cover the same streams.
    #[arg(long, num_args = 2.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Stream(a) => commands::stream(a),
        Command::Eval(a) => commands::eval(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Fuse(a) => commands::fuse(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
