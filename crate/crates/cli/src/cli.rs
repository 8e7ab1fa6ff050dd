use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use radiocal::{BayerPattern, CropRect, FocusRule, GroupMode, Scope, Weighting};

#[derive(Debug, Parser)]
#[command(name = "radiocal", version, about = "Camera calibration, photon correction and LIL conversion")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,

    /// `key = value` file of default flags; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print dimensions, bit depth, Bayer code and occupied levels of a file.
    Inspect(InspectArgs),
    /// Tabulate PIE along a z-stack and select the in-focus frame.
    Pie(PieArgs),
    /// Build a calibration file from level stacks and spectra.
    Calibrate(CalibrateArgs),
    /// Convert raw frames to 14-bit photon images.
    Correct(CorrectArgs),
    /// Least-information-loss conversion to 8 bits.
    Lil(LilArgs),
    /// Render a synthetic sensor, its calibration inputs and scene frames.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct PieOptions {
    /// Rényi order.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,

    /// `distinct` or `occurrence`.
    #[arg(long, default_value = "distinct")]
    pub weighting: Weighting,

    /// `max`, `min` or `manual:<index>`.
    #[arg(long, default_value = "max")]
    pub rule: FocusRule,
}

#[derive(Debug, Args)]
pub struct PieArgs {
    /// Frames of the stack: NRAW files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    #[command(flatten)]
    pub pie: PieOptions,

    /// z position of the first frame.
    #[arg(long)]
    pub z_start: Option<f64>,

    /// z distance between frames.
    #[arg(long, requires = "z_start")]
    pub z_step: Option<f64>,

    /// Output table.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Eight level stacks L0..L7, each an NRAW file or a directory of frames.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub levels: Vec<PathBuf>,

    /// Seven light spectra for L1..L7.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub level_spectra: Vec<PathBuf>,

    /// QE table with columns wavelength, R, G1, G2, B.
    #[arg(long, required_unless_present_all = ["qe_r", "qe_g1", "qe_g2", "qe_b"], conflicts_with_all = ["qe_r", "qe_g1", "qe_g2", "qe_b"])]
    pub qe: Option<PathBuf>,

    #[arg(long)]
    pub qe_r: Option<PathBuf>,
    #[arg(long)]
    pub qe_g1: Option<PathBuf>,
    #[arg(long)]
    pub qe_g2: Option<PathBuf>,
    #[arg(long)]
    pub qe_b: Option<PathBuf>,

    #[command(flatten)]
    pub pie: PieOptions,

    /// Frames on each side of the focus frame averaged into the level mean.
    #[arg(long, default_value_t = 0)]
    pub half_window: usize,

    /// Output NCAL file.
    #[arg(long)]
    pub output: PathBuf,

    /// Text report (defaults to the output path with `.report.txt`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Calibration file.
    #[arg(long)]
    pub calibration: PathBuf,

    /// Raw frames or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    #[arg(long)]
    pub output_dir: PathBuf,

    /// Photon count mapped to code 16383 (defaults to the largest L7 count).
    #[arg(long)]
    pub full_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LilArgs {
    /// NRAW or PNG files, or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    #[arg(long)]
    pub output_dir: PathBuf,

    /// `per-channel` or `joint`.
    #[arg(long, default_value = "per-channel")]
    pub mode: GroupMode,

    /// `single` or `series`.
    #[arg(long, default_value = "single")]
    pub scope: Scope,

    /// Treat single-channel input as a mosaic with this pattern.
    #[arg(long)]
    pub bayer: Option<BayerPattern>,

    /// `x0,y0,w,h` window applied before conversion.
    #[arg(long)]
    pub crop: Option<CropRect>,

    /// Also write quarter-resolution R, G1, G2, B planes for mosaic input.
    #[arg(long)]
    pub planes: bool,

    /// Significant bits of PNG input (defaults to the container depth).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=16))]
    pub bit_depth: Option<u8>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output_dir: PathBuf,

    #[arg(long, default_value_t = 256)]
    pub width: u32,

    #[arg(long, default_value_t = 256)]
    pub height: u32,

    #[arg(long, default_value = "RGGB")]
    pub bayer: BayerPattern,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Gain in the frame corners (centre gain is 1).
    #[arg(long, default_value_t = 0.7)]
    pub vignette: f64,

    /// Relative per-pixel gain jitter.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,

    #[arg(long, default_value_t = 300.0)]
    pub offset_max: f64,

    #[arg(long, default_value_t = 0.0)]
    pub defect_fraction: f64,

    /// Largest L7 photon count over the channels.
    #[arg(long, default_value_t = 3500.0)]
    pub full_level: f64,

    /// Number of scene frames.
    #[arg(long, default_value_t = 1)]
    pub frames: u32,

    /// `flat` (uniform, 60% of L7) or `texture`.
    #[arg(long, default_value = "texture")]
    pub scene: SceneKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SceneKind {
    Flat,
    Texture,
}
