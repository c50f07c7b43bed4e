mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "xspec", version, about = "Cross-spectral reflection, augmentation and metric-learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic multi-material scene as R/G/B/N PNGs.
    Synth(SynthArgs),
    /// Per-pixel band ratio of two single-channel PNGs.
    RatioMap(RatioMapArgs),
    /// Apply the linear transformation generator to a directory of PNGs.
    Ltg(LtgArgs),
    /// Uniform vs per-part scaling discrepancy experiment.
    Discrepancy(DiscrepancyArgs),
    /// Finite-difference gradient checks and loss invariants.
    LossCheck(LossCheckArgs),
    /// Gradient descent on synthetic features under a center-type loss.
    Descent(DescentArgs),
    /// Attention map and part descriptors for a toy feature map.
    Attn(AttnArgs),
    /// CMC and mAP for query/gallery feature CSVs.
    Eval(EvalArgs),
}

/// Options shared by every subcommand.
#[derive(Args, Clone)]
pub struct Common {
    /// key=value settings file; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory for R.png, G.png, B.png, N.png, materials.png and scene.json.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub materials: Option<usize>,
    #[arg(long)]
    pub wavelengths: Option<usize>,
    /// Brightest rendered value (below 1 keeps the scene unclamped).
    #[arg(long)]
    pub peak: Option<f64>,
}

#[derive(Args)]
pub struct RatioMapArgs {
    #[command(flatten)]
    pub common: Common,
    /// Numerator image.
    #[arg(long, value_name = "PNG")]
    pub num: Option<PathBuf>,
    /// Denominator image.
    #[arg(long, value_name = "PNG")]
    pub den: Option<PathBuf>,
    /// Material id map (gray PNG whose 8-bit values are ids).
    #[arg(long, value_name = "PNG")]
    pub materials: Option<PathBuf>,
    /// Denominators below this are masked.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Ratio CSV (x,y,ratio,mask).
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
    /// JSON statistics report (standard output if omitted).
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct LtgArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "in", value_name = "DIR")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// beta:A,B | uniform | constant:C
    #[arg(long)]
    pub gen: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON-lines trace, one object per image.
    #[arg(long, value_name = "JSONL")]
    pub trace: Option<PathBuf>,
    /// JSON summary report (standard output if omitted).
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct DiscrepancyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input PNG directory; synthetic band images are used when omitted.
    #[arg(long = "in", value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// uniform | per-part
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub parts: Option<usize>,
    /// Histogram bins of the full embedding.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of synthetic images (without --in).
    #[arg(long)]
    pub images: Option<usize>,
    /// Synthetic image height.
    #[arg(long)]
    pub height: Option<usize>,
    /// Synthetic image width.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
    /// PCA coordinates of the full embeddings (set,index,pc1,pc2).
    #[arg(long, value_name = "CSV")]
    pub pca: Option<PathBuf>,
}

#[derive(Args)]
pub struct LossCheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random batches per loss.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct DescentArgs {
    #[command(flatten)]
    pub common: Common,
    /// center | cross-center | hetero-center
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub identities: Option<usize>,
    /// Samples per modality per identity.
    #[arg(long)]
    pub per_modality: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Distance between the VIS and NIR offsets of each identity.
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectory CSV (standard output if omitted).
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct AttnArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run on a seeded random feature map.
    #[arg(long)]
    pub demo: bool,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub parts: Option<usize>,
    /// Reduced part dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// VIS | NIR
    #[arg(long)]
    pub modality: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Attention map CSV (x,y,value); standard output if omitted.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "CSV")]
    pub query: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    pub gallery: Option<PathBuf>,
    /// Comma-separated ranks, e.g. 1,10,20.
    #[arg(long)]
    pub ranks: Option<String>,
    /// JSON report (standard output if omitted).
    #[arg(long, value_name = "JSON")]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::RatioMap(a) => commands::ratio_map(a),
        Command::Ltg(a) => commands::ltg(a),
        Command::Discrepancy(a) => commands::discrepancy(a),
        Command::LossCheck(a) => commands::loss_check(a),
        Command::Descent(a) => commands::descent(a),
        Command::Attn(a) => commands::attn(a),
        Command::Eval(a) => commands::eval(a),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xspec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
