use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{InitState, ModelArg, RangeArg};

/// Spectra, simulations and phase diagrams of gain/loss coupled oscillators.
///
/// Every parameter may also be set in a TOML file passed with `--config`,
/// using the flag name as key; flags take precedence.
#[derive(Debug, Parser)]
#[command(name = "ptsym", version, about, propagate_version = true)]
pub struct Cli {
    /// TOML file of default parameter values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one of the oscillator models and write the trajectory.
    Simulate(SimulateArgs),
    /// Eigenvalues and phase of the linear gain/loss or two-box system.
    Spectrum(SpectrumArgs),
    /// Empirical phase label of a trajectory CSV.
    Classify(ClassifyArgs),
    /// Classical time of flight through x²(ix)^ε.
    Tof(TofArgs),
    /// Phase diagram over a parameter grid.
    Sweep(SweepArgs),
    /// Sharpen the phase boundary of a sweep by bisection.
    Boundary(BoundaryArgs),
}

#[derive(Debug, Args, Default)]
pub struct ManifestArgs {
    /// Run manifest path; defaults to `<out>.manifest.json` when writing a file.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// lossless, linear or transfer.
    #[arg(long)]
    pub model: Option<ModelArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Gain/loss rate of the linear model.
    #[arg(long = "a", allow_negative_numbers = true)]
    pub damping: Option<f64>,
    /// Transfer fraction of the transfer model.
    #[arg(long = "g", allow_negative_numbers = true)]
    pub transfer: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Initial state `x,p,y,q`.
    #[arg(long, allow_negative_numbers = true)]
    pub init: Option<InitState>,
    /// Record every k-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Permit steps above 0.01.
    #[arg(long)]
    pub allow_large_step: bool,
    /// Trajectory CSV, or `-` for standard output.
    #[arg(long)]
    pub out: Option<String>,
    /// Transfer-event CSV (transfer model only).
    #[arg(long)]
    pub log: Option<String>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long = "a", allow_negative_numbers = true)]
    pub damping: Option<f64>,
    /// Two-box source/sink magnitude; selects the two-box system.
    #[arg(long, allow_negative_numbers = true)]
    pub magnitude: Option<f64>,
    /// Two-box phase angle in radians.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Two-box coupling.
    #[arg(long = "g", allow_negative_numbers = true)]
    pub coupling: Option<f64>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Trajectory CSV as written by `simulate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Debug, Args)]
pub struct TofArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub energy: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Also report the estimate at 2L, 4L, ... for this many doublings.
    #[arg(long)]
    pub doublings: Option<usize>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML grid specification; its keys mirror the flags below.
    #[arg(long, value_name = "FILE")]
    pub grid: Option<PathBuf>,
    /// spectral-eps-a, dynamical-eps-a or dynamical-eps-g.
    #[arg(long)]
    pub mode: Option<String>,
    /// ε axis as `lo,hi,n`.
    #[arg(long = "eps")]
    pub eps_range: Option<RangeArg>,
    /// Damping or transfer-fraction axis as `lo,hi,n`.
    #[arg(long = "param")]
    pub param_range: Option<RangeArg>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulated time for cells without a beat period.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Boundary CSV of the grid-resolution transitions.
    #[arg(long = "boundary-out")]
    pub boundary_out: Option<String>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    /// Phase map from `sweep`, CSV or JSON.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Grid mode of a CSV map.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub iterations: Option<u32>,
    /// Refine only the column at this ε.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[command(flatten)]
    pub manifest: ManifestArgs,
}
