use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bitflip", version, about = "Single-bit-flip error analysis for binary64 kernels")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Where to write the run manifest (default: <out>.manifest.json, or
    /// stderr when writing to stdout).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sign, exponent and mantissa fields of a value.
    Anatomy {
        /// Decimal or hex-float literal.
        #[arg(allow_hyphen_values = true)]
        value: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All 64 single-bit perturbations of a value.
    Perturb {
        #[arg(allow_hyphen_values = true)]
        value: String,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify every single-flip error of a dot product.
    DotAnalyze(DotArgs),
    /// Exponent-pair lookup table.
    #[command(subcommand)]
    Table(TableCommand),
    /// Monte Carlo fault campaigns.
    #[command(subcommand)]
    Mc(McCommand),
    /// Sparse matrix utilities.
    #[command(subcommand)]
    Matrix(MatrixCommand),
    /// Instrumented restarted GMRES.
    #[command(subcommand)]
    Gmres(GmresCommand),
    /// Re-run the command recorded in a manifest and compare output digests.
    Replay {
        #[arg(value_name = "MANIFEST")]
        path: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DotMode {
    /// Enumerate every flip of the concrete vectors.
    Exact,
    /// Tally the exponent-interval Cartesian product via the lookup table.
    Interval,
}

#[derive(Args, Debug)]
pub struct DotArgs {
    /// Vector file, one value per line.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Upper edge of the grey band (class 2), e.g. ||A||_2.
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = DotMode::Exact)]
    pub mode: DotMode,
    #[arg(long, conflicts_with = "mode")]
    pub exact: bool,
    #[arg(long, conflicts_with_all = ["mode", "exact"])]
    pub interval: bool,
    /// Per-flip rows (exact mode only).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum TableCommand {
    /// Build the table and write it to a file.
    Build {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct McArgs {
    /// Vector length N.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Sample pairs per cell M.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = -10, allow_hyphen_values = true)]
    pub grid_min: i32,
    #[arg(long, default_value_t = 10, allow_hyphen_values = true)]
    pub grid_max: i32,
    /// Use the full -50..=50 grid (very long runtime).
    #[arg(long)]
    pub paper_grid: bool,
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceMode {
    Diagonal,
    Fixed,
}

#[derive(Subcommand, Debug)]
pub enum McCommand {
    /// Failure probability for every magnitude pair.
    Surface {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-bit failure probabilities along a slice of the surface.
    Slice {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, value_enum, default_value_t = SliceMode::Diagonal)]
        mode: SliceMode,
        #[arg(long, allow_hyphen_values = true, required_if_eq("mode", "fixed"))]
        fixed_mag: Option<i32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum MatrixCommand {
    /// 5-point Laplacian on a grid x grid mesh.
    Poisson {
        #[arg(long)]
        grid: usize,
        /// Multiply every row by this factor (a badly scaled variant).
        #[arg(long)]
        row_scale: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Infinity, two and Frobenius norms.
    Norms {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DGEEQU-style row/column equilibration.
    Equilibrate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scales: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GmresCommand {
    /// Solve and tally the error classes of every orthogonalization dot product.
    Analyze(GmresArgs),
}

#[derive(Args, Debug)]
pub struct GmresArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub equilibrate: bool,
    #[arg(long, default_value_t = 25)]
    pub restart: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    /// ones | random:SEED | file:PATH
    #[arg(long, default_value = "ones")]
    pub rhs: String,
    /// Do not tally the self dot product behind each basis-vector norm.
    #[arg(long)]
    pub no_norm_dot: bool,
    /// Record the exponent intervals of every instrumented dot product.
    #[arg(long)]
    pub log_intervals: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
