use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bound states in the continuum of multiband 1D Hamiltonians.
///
/// Units: hbar = 1, mass defaults to 1; energies and momenta are dimensionless.
#[derive(Debug, Parser)]
#[command(name = "bicforge", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format for the main report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the main report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads (default: number of processors). BICFORGE_JOBS takes precedence.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Log to stderr; repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Tsv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form delta-potential bound states.
    DeltaBound(DeltaArgs),
    /// Solve the self-consistency equation and apply the BIC criterion.
    BicVerify(VerifyArgs),
    /// Sweep one parameter and tabulate residuals and verdicts.
    Scan(ScanArgs),
    /// Finite-difference diagonalization near a target energy.
    Oracle(OracleArgs),
    /// Compare Green's-function kernels against closed forms.
    KernelCheck(KernelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Spin-orbit model `mu sigma_z + gamma sigma_y p` with the tuned potential.
    Soc,
    /// `mu sigma_z + g sigma_x` with `lambda delta(x) diag(1, 0)`.
    TwoBand,
    /// `p^2/2m` with `lambda delta(x)`.
    SingleBand,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, conflicts_with_all = ["two_band", "single_band", "model_file"])]
    pub model: Option<ModelKind>,
    /// Shorthand for `--model two-band`.
    #[arg(long, conflicts_with_all = ["single_band", "model_file"])]
    pub two_band: bool,
    /// Shorthand for `--model single-band`.
    #[arg(long, conflicts_with = "model_file")]
    pub single_band: bool,
    /// JSON model description (see docs/model-file.md).
    #[arg(long, conflicts_with_all = ["mu", "g", "gamma", "nu", "lambda", "mass", "b"])]
    pub model_file: Option<PathBuf>,

    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    /// General two-band coupling `b1,b2,b3` for `B = [[b1, b2], [b2, b3]]`.
    #[arg(long, value_name = "B1,B2,B3", value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<f64>>,
    /// Multiply the potential by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Box half-width L.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TolArgs {
    /// Fourier residual tolerance (relative to the spectrum peak).
    #[arg(long, default_value_t = 1e-3)]
    pub tol_bic: f64,
    /// Tail oscillation tolerance (relative to max |psi|).
    #[arg(long, default_value_t = 1e-3)]
    pub tol_tail: f64,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Write the sampled wave function (TSV).
    #[arg(long)]
    pub wavefunction: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub tol: TolArgs,
    /// Solve at this energy instead of searching.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Search window `lo:hi` (default: the mixed-pole region).
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Write Fourier-spectrum samples (TSV).
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Write the solved state (TSV).
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanParam {
    Scale,
    Nu,
    Gamma,
    Mu,
    G,
    Lambda,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub tol: TolArgs,
    #[arg(long, value_enum)]
    pub param: ScanParam,
    /// `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub range: String,
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Tail-mass cut (default L/2).
    #[arg(long)]
    pub x_cut: Option<f64>,
    /// Write the eigenvectors (TSV, one block per state).
    #[arg(long)]
    pub states: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Check a single two-band energy instead of the default suite.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
}
