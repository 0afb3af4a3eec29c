use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rgk_core::cost::Variant;
use rgk_core::Mode;

#[derive(Debug, Parser)]
#[command(name = "rgk", version, about = "Region-reorganized layout conditioning toolkit")]
pub struct Cli {
    /// Print a machine-readable description of every command and exit.
    #[arg(long)]
    pub help_json: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a layout's token grid into regions.
    Partition(PartitionArgs),
    /// Run regional cross-attention over a feature map.
    Attend(AttendArgs),
    /// Generate a synthetic layout corpus.
    GenLayouts(GenArgs),
    /// Analytical FLOPs of the attention variants.
    Flops(FlopsArgs),
    /// Time the attention variants.
    Bench(BenchArgs),
    /// Score generated samples or summarize their descriptions.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Merge metric reports or cost sweeps into one CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct LayoutInput {
    /// Layout JSON file.
    #[arg(long)]
    pub layout: PathBuf,
    /// Warn about unknown fields instead of rejecting them.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub input: LayoutInput,
    /// Token grid as HxW, or a single number for a square grid.
    #[arg(long, default_value = "16x16", value_parser = parse_grid)]
    pub grid: (usize, usize),
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttendArgs {
    #[command(flatten)]
    pub input: LayoutInput,
    /// Feature file (u32 LE H, W, C then f32 LE data). Random features when omitted.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Grid for random features.
    #[arg(long, default_value = "16x16", value_parser = parse_grid)]
    pub grid: (usize, usize),
    /// Channels for random features.
    #[arg(long, default_value_t = 64)]
    pub channels: usize,
    #[arg(long, default_value_t = 64)]
    pub attn_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: Mode,
    /// Keep the output projection at zero, as in a freshly added layer.
    #[arg(long)]
    pub zero_init: bool,
    #[arg(long, env = "RGK_SEED")]
    pub seed: Option<u64>,
    /// Output feature file.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics JSON file; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, env = "RGK_SEED")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub min_objects: usize,
    #[arg(long, default_value_t = 6)]
    pub max_objects: usize,
    /// Probability that a box is placed over an earlier one.
    #[arg(long, default_value_t = 0.5)]
    pub overlap_bias: f64,
    /// Image size as WxH.
    #[arg(long, default_value = "512x512", value_parser = parse_grid)]
    pub image_size: (usize, usize),
    /// Label file, one description per line; the bundled vocabulary otherwise.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Layout JSON; a two-object 77-token fixture when omitted.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub lenient: bool,
    #[arg(long, default_value_t = 640)]
    pub channels: u64,
    #[arg(long, default_value_t = 640)]
    pub attn_dim: u64,
    #[arg(long, default_value_t = 8)]
    pub heads: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(long, default_value = "32x32", value_parser = parse_grid)]
    pub grid: (usize, usize),
    /// Emit a CSV over 16x16, 32x32 and 64x64 grids instead of one JSON comparison.
    #[arg(long)]
    pub sweep: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub cost: CostArgs,
    /// Comma-separated grid sides.
    #[arg(long, default_value = "16,32", value_delimiter = ',')]
    pub sides: Vec<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long, default_value_t = rgk_core::cost::DEFAULT_REPETITIONS)]
    pub reps: usize,
    #[arg(long, env = "RGK_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    RegionalCross,
    ExtendedSelf,
    PerObjectCross,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::RegionalCross => Variant::RegionalCross,
            VariantArg::ExtendedSelf => Variant::ExtendedSelf,
            VariantArg::PerObjectCross => Variant::PerObjectCross,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Crop-CLIP object/label alignment.
    Cropclip(MetricArgs),
    /// SAM-IoU layout fidelity.
    Samiou(MetricArgs),
    /// Description length, readability and bucket histogram.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Mock,
    Files,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Directory of `<sample>.json` layouts.
    #[arg(long)]
    pub layouts: PathBuf,
    /// Directory of `<sample>.ppm` images; geometry-only images when absent.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendArg,
    /// Embedding JSON for the files backend.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Directory of `<sample>_<object>.pgm` masks for the files backend.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub lower: f64,
    #[arg(long, default_value_t = 0.5)]
    pub upper: f64,
    /// Seed of the mock embedder.
    #[arg(long, env = "RGK_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub lenient: bool,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-object CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub layouts: PathBuf,
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metric report JSON files, joined on sample id.
    #[arg(long = "metric", conflicts_with = "sweeps")]
    pub metrics: Vec<PathBuf>,
    /// Sweep CSV files, concatenated.
    #[arg(long = "sweep")]
    pub sweeps: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| -> Result<usize, String> {
        match t.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer, got {t:?}")),
            Ok(v) => Ok(v),
        }
    };
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => parse(s).map(|v| (v, v)),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: rgk_core::Error| e.to_string())
}
