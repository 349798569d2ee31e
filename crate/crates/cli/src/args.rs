use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omniocc::compositor::BlendMode;
use omniocc::pipeline::{FlowSource, FrameRange};

#[derive(Debug, Parser)]
#[command(
    name = "omniocc",
    version,
    about = "Occlusion-aware CG compositing for moving equirectangular video"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "OMNIOCC_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// TV-L1 flow on FROM's grid pointing into TO.
    Flow(FlowArgs),
    /// Triangulate depth of one frame from its backward flow and poses.
    Depth(DepthArgs),
    /// Foreground probability from real and CG depth.
    Probmap(ProbmapArgs),
    /// Blend a CG layer into one frame.
    Composite(CompositeArgs),
    /// Run every stage over a dataset directory.
    Pipeline(PipelineArgs),
    /// Render a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Side-by-side strips and metrics of the blend modes.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Pipeline configuration (TOML); missing keys take their defaults.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    pub from: PathBuf,
    pub to: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub warps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DepthArgs {
    /// Backward flow of the frame (frame → previous frame).
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub poses: PathBuf,
    /// Index of the frame the flow belongs to.
    #[arg(long)]
    pub frame: usize,
    /// Index of the previous frame; defaults to `frame - 1`.
    #[arg(long)]
    pub prev: Option<usize>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write the divergence point as JSON.
    #[arg(long)]
    pub divergence_out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub epsilon_tri_deg: Option<f64>,
    #[arg(long)]
    pub d_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProbmapArgs {
    /// Real-scene depth (PFM).
    #[arg(long)]
    pub real: PathBuf,
    /// CG depth (PFM); invalid where there is no CG.
    #[arg(long)]
    pub cg: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub p_unknown: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Visibility,
    Alpha,
    FixedTransparency,
}

impl From<ModeArg> for BlendMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Visibility => BlendMode::Visibility,
            ModeArg::Alpha => BlendMode::Alpha,
            ModeArg::FixedTransparency => BlendMode::FixedTransparency,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompositeArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub uncertainty: PathBuf,
    #[arg(long)]
    pub cg_color: PathBuf,
    #[arg(long)]
    pub cg_depth: PathBuf,
    /// Foreground probability (PFM).
    #[arg(long)]
    pub prob: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write the per-pixel CG opacity (PFM).
    #[arg(long)]
    pub alpha_out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FlowSourceArg {
    Computed,
    Truth,
}

impl From<FlowSourceArg> for FlowSource {
    fn from(s: FlowSourceArg) -> Self {
        match s {
            FlowSourceArg::Computed => FlowSource::Computed,
            FlowSourceArg::Truth => FlowSource::Truth,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Frame range `A..B` (half-open), `A..`, `..B` or a single index.
    #[arg(long, value_parser = parse_range)]
    pub frames: Option<FrameRange>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub flow_source: Option<FlowSourceArg>,
    /// Blend modes to render (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub modes: Option<Vec<ModeArg>>,
    #[arg(long)]
    pub in_flight: Option<usize>,
    /// Temporal fusion window, frames.
    #[arg(long)]
    pub window: Option<usize>,
    /// Blend window side, pixels.
    #[arg(long)]
    pub blend_window: Option<usize>,
    /// Directory for intermediate products.
    #[arg(long, env = "OMNIOCC_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Recompute everything even when cached products are valid.
    #[arg(long)]
    pub no_cache: bool,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    Street,
    LateralWall,
    WallApproach,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene description (JSON); overrides the preset.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "street")]
    pub preset: Preset,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    /// Camera travel per frame, meters.
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Wall distance for the wall presets, meters.
    #[arg(long, default_value_t = 10.0)]
    pub distance: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn parse_range(s: &str) -> Result<FrameRange, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad frame index {t:?}: {e}"))
    };
    match s.split_once("..") {
        None => {
            let i = num(s)?;
            Ok(FrameRange::new(i, i + 1))
        }
        Some((a, b)) => {
            let start = if a.is_empty() { 0 } else { num(a)? };
            let end = if b.is_empty() { None } else { Some(num(b)?) };
            if end.is_some_and(|e| e < start) {
                return Err(format!("empty range {s:?}"));
            }
            Ok(FrameRange { start, end })
        }
    }
}
