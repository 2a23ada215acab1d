use std::path::PathBuf;

use bca::adapter::DEFAULT_TEMPERATURE;
use bca::harness::{AblationMode, DEFAULT_WINDOW};
use bca::synthgen::{ShiftModel, DEFAULT_MIN_SEPARATION};
use bca::{Error, Preset, Result, UpdateStrategy};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bca", version, about = "Streaming Bayesian class adaptation over embedding streams")]
pub struct Cli {
    /// Seed for generated data; echoed into every report.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Suppress the configuration echo and tables on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    /// Directory for output files.
    #[arg(long, global = true, env = "BCA_OUTPUT_DIR", default_value = ".")]
    pub output_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stream and its text-embedding bank.
    Gen(GenArgs),
    /// Evaluate a stream under one ablation mode.
    Run(RunArgs),
    /// Evaluate a stream under all four ablation modes.
    Ablate(AdaptArgs),
    /// Evaluate a stream over a tau x n1 x n2 grid.
    Sweep(SweepArgs),
    /// Summarize a checkpoint or an embedding file.
    Inspect(InspectArgs),
    /// Write the prior matrix of a checkpoint as CSV.
    ExportPrior(ExportPriorArgs),
    /// Time the adaptation phases on synthetic data.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Stream spec as JSON; replaces the shape and shift flags below.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Text embeddings per class (M = templates * classes).
    #[arg(long, default_value_t = 1)]
    pub templates: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub text_perturbation: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_SEPARATION)]
    pub min_separation: f64,
    /// `confusion:<diagonal>`, `rotation:<radians>`, `skew:<w0>,<w1>,...`
    /// or `none`. Repeat to combine.
    #[arg(long)]
    pub shift: Vec<String>,
    /// File name prefix for the outputs.
    #[arg(long, default_value = "")]
    pub prefix: String,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Labeled BCAE stream.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// BCAE text-embedding bank; row m belongs to class m mod K.
    #[arg(long)]
    pub text_embeddings: PathBuf,
    /// Named hyperparameter set; explicit flags override it.
    #[arg(long, default_value = "ood", value_parser = parse_preset)]
    pub preset: Preset,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n1: Option<u64>,
    #[arg(long)]
    pub n2: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    /// `count` or `momentum:<alpha>`.
    #[arg(long, default_value = "count", value_parser = parse_strategy)]
    pub strategy: UpdateStrategy,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Record per-phase timings in the report.
    #[arg(long)]
    pub time: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub adapt: AdaptArgs,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: AblationMode,
    /// Write `state-<index>.bcas` after every N samples.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Start from this checkpoint instead of the text bank; its stored
    /// hyperparameters are used.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Index of the first sample in `--embeddings` when resuming.
    #[arg(long, default_value_t = 0)]
    pub start_index: usize,
    /// Write the final state here.
    #[arg(long)]
    pub save_state: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub adapt: AdaptArgs,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: AblationMode,
    #[arg(long, value_delimiter = ',', required = true)]
    pub taus: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n1s: Vec<u64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n2s: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// BCAS checkpoint.
    #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
    pub state: Option<PathBuf>,
    /// BCAE file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportPriorArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Keep only the N classes with the most prior updates.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "prior.csv")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "512")]
    pub dims: Vec<usize>,
    /// Class counts; M = K.
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    pub classes: Vec<usize>,
    /// Repetitions over the stream.
    #[arg(long, default_value_t = 3)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<AblationMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn parse_strategy(s: &str) -> std::result::Result<UpdateStrategy, String> {
    match s.split_once(':') {
        None if s == "count" => Ok(UpdateStrategy::CountBased),
        None if s == "momentum" => Ok(UpdateStrategy::Momentum { alpha: 0.01 }),
        Some(("momentum", a)) => {
            let alpha = a.parse::<f64>().map_err(|e| format!("momentum alpha: {e}"))?;
            let strategy = UpdateStrategy::Momentum { alpha };
            strategy.validate().map_err(|e| e.to_string())?;
            Ok(strategy)
        }
        _ => Err(format!("unknown strategy `{s}` (expected count or momentum:<alpha>)")),
    }
}

/// Parse repeated `--shift` values into one shift model.
pub fn parse_shifts(values: &[String], num_classes: usize) -> Result<ShiftModel> {
    let bad = |reason: String| Error::InvalidSpec { field: "shift", reason };
    let mut parts = Vec::new();
    for v in values {
        let (kind, arg) = v.split_once(':').unwrap_or((v.as_str(), ""));
        let number = |a: &str| a.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}")));
        match kind {
            "none" => {}
            "confusion" => {
                let d = number(arg)?;
                if !(0.0..=1.0).contains(&d) {
                    return Err(bad(format!("confusion diagonal must lie in [0, 1], got {d}")));
                }
                parts.push(ShiftModel::confusion_with_diagonal(num_classes, d));
            }
            "rotation" => parts.push(ShiftModel::MeanRotation { angle: number(arg)? }),
            "skew" => {
                let weights = arg.split(',').map(number).collect::<Result<Vec<_>>>()?;
                parts.push(ShiftModel::LabelSkew { weights });
            }
            _ => return Err(bad(format!("unknown shift `{v}` (expected confusion, rotation, skew or none)"))),
        }
    }
    let shift = match parts.len() {
        0 => ShiftModel::None,
        1 => parts.remove(0),
        _ => ShiftModel::Combined { parts },
    };
    shift.validate(num_classes)?;
    Ok(shift)
}
