//! `adrd`: training, inference, evaluation and inspection for the 4x super-resolution network.

mod ablate;
mod common;
mod error;
mod evaluate;
mod infer;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use common::Preset;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "adrd", version, about = "4x single-image super-resolution on the CPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network on a directory of high-resolution PNG images.
    Train(TrainArgs),
    /// Super-resolve PNG images with a trained checkpoint.
    Sr(SrArgs),
    /// Score a checkpoint (or the bicubic baseline) on high-resolution images.
    Eval(EvalArgs),
    /// Train and compare DB/WDB, noSA/SA and D/RD variants at desk scale.
    Ablate(AblateArgs),
    /// PSNR under the four Gaussian noise variances.
    NoiseEval(NoiseEvalArgs),
    /// Print the learned dense-block edge weights of a checkpoint.
    ExportWeights(ExportWeightsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct NetArgs {
    /// Network preset used as the base topology.
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,
    /// Growth rate override for the preset.
    #[arg(long)]
    pub growth_rate: Option<usize>,
    /// key=value file overriding preset fields.
    #[arg(long)]
    pub net_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of high-resolution training PNGs.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of validation PNGs, scored after every epoch.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Output directory for the log and checkpoints.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// key=value training config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Seed for sampling and, on fresh runs, weight initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// High-resolution patch side.
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub patches_per_image: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Disable flip and rotation augmentation.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Args, Debug)]
pub struct SrArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// A low-resolution PNG or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Output PNG, or a directory when the input is a directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Tile side in input pixels; 0 runs whole images.
    #[arg(long, default_value_t = 0)]
    pub tile: usize,
    /// Context pixels around each tile.
    #[arg(long, default_value_t = 8)]
    pub overlap: usize,
    /// Expected topology as a key=value file over the full preset; a differing checkpoint is rejected.
    #[arg(long)]
    pub net_config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FeatureArgs {
    /// Stages of the frozen random feature extractor used by RCIR.
    #[arg(long, default_value_t = 3)]
    pub feature_depth: usize,
    #[arg(long, default_value_t = 16)]
    pub feature_channels: usize,
    #[arg(long, default_value_t = adrd_core::metrics::RandomConvExtractor::DEFAULT_SEED)]
    pub feature_seed: u64,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("method").required(true).args(["checkpoint", "bicubic"]))]
pub struct EvalArgs {
    /// Directory of high-resolution PNGs; inputs are synthesized by bicubic shrinking.
    #[arg(long)]
    pub hr: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score the bicubic baseline instead of a network.
    #[arg(long)]
    pub bicubic: bool,
    /// CSV report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Border excluded from PSNR/SSIM; defaults to the scale factor.
    #[arg(long)]
    pub border: Option<usize>,
    /// Also write the super-resolved PNGs here.
    #[arg(long)]
    pub save_sr: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub tile: usize,
    /// Scale factor for the bicubic baseline; a checkpoint supplies its own.
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Directory of high-resolution training PNGs.
    #[arg(long)]
    pub data: PathBuf,
    /// Evaluation images; defaults to the training images.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Optimizer steps per variant.
    #[arg(long, default_value_t = 300)]
    pub steps: u64,
    /// Growth rates compared in the DB/WDB and noSA/SA studies.
    #[arg(long, value_delimiter = ',', default_values_t = [4, 8])]
    pub growth_rates: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Debug)]
pub struct NoiseEvalArgs {
    #[arg(long)]
    pub hr: PathBuf,
    /// Network to compare against bicubic; bicubic only when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Add noise to the high-resolution image before shrinking instead of to the input.
    #[arg(long)]
    pub noise_on_hr: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub border: Option<usize>,
    /// Scale factor without a checkpoint.
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    /// Output directory for noise.csv and noise_table.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportWeightsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output text file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(a) => train::run(a),
        Command::Sr(a) => infer::sr(a),
        Command::Eval(a) => evaluate::eval(a),
        Command::Ablate(a) => ablate::run(a),
        Command::NoiseEval(a) => evaluate::noise_eval(a),
        Command::ExportWeights(a) => infer::export_weights(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adrd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
