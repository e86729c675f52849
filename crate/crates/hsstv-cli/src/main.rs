//! Command-line pipeline for hyperspectral restoration: synthesize
//! degradations, restore by constrained ADMM, reconstruct from compressed
//! measurements, score results, and export curves and previews.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "hsstv",
    version,
    about = "Hyperspectral image restoration toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add mixed noise (Gaussian + salt-and-pepper + dead lines) to a cube
    Degrade(DegradeArgs),
    /// Restore a cube from mixed noise by constrained ADMM
    Restore(RestoreArgs),
    /// Randomly sample a cube into a compressed measurement vector
    CsSample(CsSampleArgs),
    /// Reconstruct a cube from compressed measurements
    CsRestore(CsRestoreArgs),
    /// PSNR/SSIM between two cubes, plus optional response curves
    Metrics(MetricsArgs),
    /// Export three bands of a cube as an RGB PNG
    ExportRgb(ExportRgbArgs),
    /// Solve the denoising problem across a grid of omega values
    Sweep(SweepArgs),
    /// Convert a headerless raw value file into a cube file
    Import(ImportArgs),
}

#[derive(Args)]
struct NoiseFlags {
    /// Gaussian noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    /// Salt-and-pepper rate per voxel
    #[arg(long = "sp")]
    s_p: Option<f64>,
    /// Vertical dead-line rate per (column, band)
    #[arg(long = "lv")]
    l_v: Option<f64>,
    /// Horizontal dead-line rate per (row, band)
    #[arg(long = "lh")]
    l_h: Option<f64>,
}

#[derive(Args)]
struct RegFlags {
    /// Regularizer: hsstv, htv, sstv, or asstv
    #[arg(long)]
    reg: Option<String>,
    /// Weight of the direct spatial differences (hsstv)
    #[arg(long)]
    omega: Option<f64>,
    /// Group norm order, 1 (anisotropic) or 2 (isotropic)
    #[arg(long)]
    p: Option<u8>,
    /// ASSTV axis weights as tau_v,tau_h,tau_b
    #[arg(long, value_parser = settings::parse_triple)]
    tau: Option<settings::Triple>,
}

#[derive(Args)]
struct SolverFlags {
    /// ADMM step size
    #[arg(long)]
    gamma: Option<f64>,
    /// Iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stop when the l2 change of the iterate drops below this
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct BoxFlags {
    /// Lower edge of the dynamic range
    #[arg(long)]
    box_min: Option<f64>,
    /// Upper edge of the dynamic range
    #[arg(long)]
    box_max: Option<f64>,
}

#[derive(Args)]
struct DegradeArgs {
    /// Input cube (.hsc); falls back to [paths].input in the config
    input: Option<PathBuf>,
    /// Degraded output cube (.hsc); falls back to [paths].output
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Sidecar listing the sparse-corrupted voxel indices (.hsm)
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Config file supplying defaults for any flag not given
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseFlags,
    #[command(flatten)]
    range: BoxFlags,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RestoreArgs {
    /// Observed cube (.hsc); falls back to [paths].input in the config
    input: Option<PathBuf>,
    /// Restored output cube (.hsc); falls back to [paths].output
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    reg: RegFlags,
    /// Fidelity-ball radius; overrides the noise-statistics heuristic
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sparse-noise l1 radius; overrides the heuristic
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    noise: NoiseFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    range: BoxFlags,
    /// Machine-readable JSON report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-iteration convergence trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CsSampleArgs {
    /// Input cube (.hsc); falls back to [paths].input in the config
    input: Option<PathBuf>,
    /// Sampling rate m in (0, 1)
    #[arg(long)]
    rate: f64,
    /// Measurement vector output (.hsc, stored as an Mx1x1 cube)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Sampling mask output (.hsm); falls back to [paths].mask
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Gaussian noise on the measurements
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CsRestoreArgs {
    /// Measurement vector (.hsc written by cs-sample)
    input: Option<PathBuf>,
    /// Sampling mask (.hsm); falls back to [paths].mask
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Reconstructed cube output (.hsc); falls back to [paths].output
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    reg: RegFlags,
    /// Fidelity-ball radius; overrides sigma * sqrt(M)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Measurement noise level feeding the radius heuristic
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    range: BoxFlags,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Cube under test (.hsc)
    input: PathBuf,
    /// Reference cube (.hsc)
    reference: PathBuf,
    /// Metrics CSV (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// SSIM window side
    #[arg(long, default_value_t = 8)]
    window: usize,
    /// SSIM window stride
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Extract the values of one row: row,band (1-based)
    #[arg(long, value_parser = settings::parse_pair)]
    spatial: Option<settings::Pair>,
    /// Where to write the spatial profile CSV
    #[arg(long)]
    spatial_out: Option<PathBuf>,
    /// Extract the spectrum of one pixel: row,col (1-based)
    #[arg(long, value_parser = settings::parse_pair)]
    spectral: Option<settings::Pair>,
    /// Where to write the spectral profile CSV
    #[arg(long)]
    spectral_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportRgbArgs {
    /// Input cube (.hsc)
    input: PathBuf,
    /// PNG output
    #[arg(short, long)]
    out: PathBuf,
    /// 1-based band indices mapped to R,G,B
    #[arg(long, value_parser = settings::parse_band_triple, default_value = "8,16,32")]
    bands: settings::BandTriple,
}

#[derive(Args)]
struct SweepArgs {
    /// Observed cube (.hsc)
    input: PathBuf,
    /// Ground-truth cube for scoring (.hsc)
    #[arg(long)]
    reference: PathBuf,
    /// Sweep CSV output
    #[arg(short, long)]
    out: PathBuf,
    /// Comma-separated omega values (default: 0.01 to 0.2, step 0.01)
    #[arg(long, value_delimiter = ',')]
    omegas: Option<Vec<f64>>,
    /// Group norm order for every point
    #[arg(long, default_value_t = 1)]
    p: u8,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fidelity-ball radius; overrides the heuristic
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sparse-noise l1 radius; overrides the heuristic
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    noise: NoiseFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    range: BoxFlags,
    /// Concurrent solver instances (default: one per omega, capped at 8)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ImportArgs {
    /// Headerless raw file of little-endian values in column-stacked order
    input: PathBuf,
    /// Vertical extent
    #[arg(long)]
    nv: usize,
    /// Horizontal extent
    #[arg(long)]
    nh: usize,
    /// Band count
    #[arg(long)]
    bands: usize,
    /// Value encoding: f32 or f64
    #[arg(long, default_value = "f32")]
    dtype: String,
    /// Cube output (.hsc)
    #[arg(short, long)]
    out: PathBuf,
}

/// Failures split by exit code: invalid input (2) vs solver breakdown (3).
pub enum CliError {
    Invalid(String),
    Solver(String),
}

impl From<hsstv::Error> for CliError {
    fn from(e: hsstv::Error) -> Self {
        match e {
            hsstv::Error::SolverFailure(m) => CliError::Solver(m),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Degrade(args) => commands::degrade(args),
        Command::Restore(args) => commands::restore(args),
        Command::CsSample(args) => commands::cs_sample(args),
        Command::CsRestore(args) => commands::cs_restore(args),
        Command::Metrics(args) => commands::metrics(args),
        Command::ExportRgb(args) => commands::export_rgb(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Import(args) => commands::import(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(3)
        }
    }
}
