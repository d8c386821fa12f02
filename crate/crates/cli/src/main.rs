//! `tubetrace` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime or backend
//! failures.

mod backend;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tubetrace", version, about = "Zero-shot 3D tubular structure segmentation")]
struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    rng_seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic vessel volume, its labels and trunk seeds.
    Synth(SynthArgs),
    /// Propose seeds from bright connected components.
    Seeds(SeedsArgs),
    /// Segment tubular structures from seeds.
    Segment(SegmentArgs),
    /// Run a comparison method.
    Baseline(BaselineArgs),
    /// Score a prediction against ground truth.
    Eval(EvalArgs),
    /// Remove per-slice brightness flicker along z.
    Deflicker(DeflickerArgs),
    /// Serve a built-in segmenter over the line protocol on stdin/stdout.
    #[command(hide = true)]
    ServeBackend(ServeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator spec as JSON; missing keys take their defaults.
    spec: std::path::PathBuf,
    /// Writes `<prefix>.vol.volj`, `<prefix>.gt.volj` and `<prefix>.seeds.json`.
    out_prefix: String,
}

#[derive(Debug, Args)]
struct SeedingArgs {
    /// Intensity percentile above which voxels are foreground.
    #[arg(long, default_value_t = 98.0)]
    eta: f64,
    /// Components smaller than this many voxels are ignored.
    #[arg(long, default_value_t = 50)]
    min_voxels: usize,
    /// Deflicker with this odd window before thresholding.
    #[arg(long)]
    deflicker: Option<usize>,
}

#[derive(Debug, Args)]
struct SeedsArgs {
    volume: std::path::PathBuf,
    #[command(flatten)]
    seeding: SeedingArgs,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    volume: std::path::PathBuf,
    /// oracle:<gt.volj>, shape:<gt.volj>, threshold, or external:<command>.
    #[arg(long)]
    backend: String,
    /// A seeds JSON file, or `auto` to threshold the volume.
    #[arg(long, default_value = "auto")]
    seeds: String,
    #[command(flatten)]
    seeding: SeedingArgs,
    /// Engine configuration as JSON.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[arg(long, default_value = "pred.volj")]
    out: std::path::PathBuf,
    /// Worker threads; each gets its own backend instance.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write one JSON object per traversal event to this file.
    #[arg(long)]
    events: Option<std::path::PathBuf>,
    /// Debug: track along this axis only.
    #[arg(long, value_enum)]
    restrict_axis: Option<AxisArg>,
    /// Debug: disable turning-point sampling.
    #[arg(long)]
    naive: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Z,
    Y,
    X,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(value_enum)]
    method: BaselineMethod,
    volume: std::path::PathBuf,
    /// Required for `iou`; same forms as `segment --backend`.
    #[arg(long)]
    backend: Option<String>,
    /// Method configuration as JSON.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[arg(long, default_value = "baseline.volj")]
    out: std::path::PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineMethod {
    Color,
    Iou,
}

#[derive(Debug, Args)]
struct EvalArgs {
    gt: std::path::PathBuf,
    pred: std::path::PathBuf,
    /// Score only the largest ground-truth instance and add voxel scores.
    #[arg(long)]
    largest_only: bool,
    /// Pair accuracy a match must exceed to count as a true positive.
    #[arg(long, default_value_t = 0.0)]
    match_threshold: f64,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DeflickerArgs {
    volume: std::path::PathBuf,
    out: std::path::PathBuf,
    /// Odd moving-average window in slices.
    #[arg(long, default_value_t = 11)]
    window: usize,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(value_enum)]
    kind: ServeKind,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ServeKind {
    Echo,
    ImageOracle,
}

/// Errors the user can fix by changing the command line.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
