//! `fdanet`: synthesis, training, inference, verification, benchmarks and
//! FLOPs accounting behind one binary.
//!
//! Exit codes: 0 success, 1 verification failure, 2 IO or usage error,
//! 3 format or compatibility error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdanet::lineformer::AttentionImpl;
use fdanet::verify::Level;

#[derive(Parser)]
#[command(name = "fdanet", version, about = "Raw low-light enhancement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic paired dataset and its manifest.
    Synth(SynthArgs),
    /// Train on a dataset directory; writes metrics.csv and checkpoints.
    Train(TrainArgs),
    /// Enhance one packed raw file; writes a PPM preview and an f32 result.
    Infer(InferArgs),
    /// Run the built-in verification suite.
    Check(CheckArgs),
    /// Time the attention executors over a grid of sizes.
    Bench(BenchArgs),
    /// Per-block MAC and parameter accounting.
    Flops(FlopsArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    /// Mosaic size as HxW.
    #[arg(long, default_value = "128x128")]
    pub size: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated amplification ratios drawn per sample.
    #[arg(long)]
    pub ratios: Option<String>,
}

/// Training options. Flags override the config file, which overrides the
/// built-in defaults.
#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file with optional `model` and `train` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Start from the `default` or `tiny` architecture.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub crop_size: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[arg(long)]
    pub attention: Option<AttentionImpl>,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Packed raw file, `[4, H, W]` or `[1, 4, H, W]`.
    #[arg(long)]
    pub input: PathBuf,
    /// PPM path; the f32 result goes next to it with a `.fraw` extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Use the line-buffer executor.
    #[arg(long)]
    pub streaming: bool,
    /// Multiply the input by this ratio (then clamp) before the network.
    #[arg(long)]
    pub ratio: Option<f32>,
    /// Model config to use instead of the one stored in the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct CheckArgs {
    #[arg(long, default_value = "quick")]
    pub level: Level,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Executors to time, comma-separated.
    #[arg(long = "impl", default_value = "naive,linear,streaming")]
    pub kinds: String,
    /// Comma-separated HxW sizes.
    #[arg(long, default_value = "16x64,16x128,16x256,16x512,16x1024")]
    pub sizes: String,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    /// Odd window height, or `full` for a window spanning the whole image.
    #[arg(long, default_value = "7")]
    pub window: String,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FlopsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Input shape as NxCxHxW.
    #[arg(long, default_value = "1x4x256x256")]
    pub input: String,
    #[arg(long, default_value = "linear")]
    pub attention: AttentionImpl,
    #[arg(long)]
    pub json: bool,
}

/// A failed command and the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<fdanet::Error> for Failure {
    fn from(e: fdanet::Error) -> Self {
        use fdanet::Error::*;
        let code = match e {
            Io(_) | Usage(_) => 2,
            Dimension { .. }
            | Config(_)
            | Protocol(_)
            | Format { .. }
            | ShapeMismatch { .. }
            | MissingTensor { .. }
            | NonFinite { .. }
            | Json(_) => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        fdanet::Error::from(e).into()
    }
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Check(a) => commands::check(a),
        Command::Bench(a) => commands::bench(a),
        Command::Flops(a) => commands::flops(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
