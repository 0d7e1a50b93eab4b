use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::review::ReviewMode;

#[derive(Debug, Parser)]
#[command(
    name = "curatekit",
    version,
    about = "Detection dataset evaluation and curation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score detections against ground truth with class-weighted AP/AR.
    Eval(EvalArgs),
    /// Class distributions, mask sizes and size/performance correlation.
    Stats(StatsArgs),
    /// Stratified train/val/test split.
    Split(SplitArgs),
    /// Write augmented copies of a dataset.
    Augment(AugmentArgs),
    /// Run or export the annotation pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Serve the review API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Box,
    Mask,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth dataset JSON.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections JSON array.
    #[arg(long)]
    pub dt: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Box)]
    pub kind: KindArg,
    /// Row label in the printed table; defaults to the detections file stem.
    #[arg(long)]
    pub method: Option<String>,
    /// Where to write the full report.
    #[arg(long, default_value = "eval_report.json")]
    pub out: PathBuf,
    /// Also print per-class AP.
    #[arg(long)]
    pub per_class: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset JSON; repeat to compare several.
    #[arg(long, required = true)]
    pub gt: Vec<PathBuf>,
    /// Write relative mask sizes per category as JSON.
    #[arg(long)]
    pub sizes_out: Option<PathBuf>,
    /// Evaluation reports (from `eval`) for the first two datasets, to correlate
    /// size differences with AP differences.
    #[arg(long, num_args = 2, value_names = ["REPORT_A", "REPORT_B"])]
    pub correlate: Option<Vec<PathBuf>>,
    /// Which AP the correlation uses.
    #[arg(long, value_enum, default_value_t = KindArg::Mask)]
    pub kind: KindArg,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Train, val and test fractions, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0.539,0.060,0.401")]
    pub fractions: Vec<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory the dataset's file names are relative to.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output directory for images and `annotations.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub p_flip: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_photometric: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_crop: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_jitter: f64,
    #[arg(long, default_value_t = 0.1)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub scale_max: f64,
    /// Place jittered content at a random offset instead of the top-left.
    #[arg(long)]
    pub random_anchor: bool,
    /// Also write side-by-side original/augmented composites to `<out>/preview`.
    #[arg(long)]
    pub preview: bool,
}

#[derive(Debug, Args)]
pub struct WorkspaceArgs {
    /// Line-delimited product manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Decision log; created if missing.
    #[arg(long)]
    pub log: PathBuf,
    /// Root for relative image paths; defaults to the manifest's directory.
    #[arg(long)]
    pub images: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Advance pending candidates through the automatic stages.
    Run {
        #[command(flatten)]
        ws: WorkspaceArgs,
        /// `mock:<tables.json>` or the base URL of the model services.
        #[arg(long)]
        oracles: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value = "an object")]
        prompt: String,
        /// Only process candidates that passed the human filter.
        #[arg(long)]
        require_filter: bool,
    },
    /// Print status counts.
    Status {
        #[command(flatten)]
        ws: WorkspaceArgs,
    },
    /// Write the approved candidates as a dataset.
    Export {
        #[command(flatten)]
        ws: WorkspaceArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CURATEKIT_PORT", default_value_t = 8420)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, value_enum)]
    pub queue: ReviewMode,
    #[command(flatten)]
    pub ws: WorkspaceArgs,
    /// Sliding window for the speed estimate, in seconds.
    #[arg(long, default_value_t = 60)]
    pub window_secs: u32,
}
