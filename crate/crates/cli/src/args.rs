use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "revind", version, about = "Round-off and variational chaos indicators for discrete maps")]
pub struct Cli {
    /// key=value file supplying defaults for any flag of the subcommand
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reversibility error, orbit divergence or global error of one orbit
    OrbitError(OrbitErrorArgs),
    /// mLCE, MEGNO or SALI of one orbit
    Variational(VariationalArgs),
    /// Variance of reversibility displacements over an ensemble
    Ensemble(EnsembleArgs),
    /// Indicator over a grid of initial conditions
    Scan(ScanArgs),
    /// Row or column of a scan
    Section(SectionArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    /// translation, rotation, bernoulli, standard, skew or froeschle
    #[arg(long)]
    pub map: String,
    /// Map parameter as key=value (repeatable, or comma separated)
    #[arg(long = "param", value_name = "K=V", value_delimiter = ',')]
    pub params: Vec<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ErrorIndicator {
    Rev,
    Div,
    Global,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariationalIndicator {
    Mlce,
    Megno,
    Sali,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScanIndicator {
    Rev,
    Div,
    Global,
    Mlce,
    Megno,
    Sali,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Roundoff,
    Noise,
}

#[derive(Args, Debug)]
pub struct OrbitErrorArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Initial state, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum, default_value = "rev")]
    pub indicator: ErrorIndicator,
    /// single, double, extended113, exact or p<bits>:<emin>:<emax>
    #[arg(long, default_value = "single")]
    pub spec: String,
    /// Reference precision of the divergence
    #[arg(long = "ref-spec", default_value = "double")]
    pub ref_spec: String,
    /// full or action
    #[arg(long, default_value = "full")]
    pub norm: String,
    /// all, log:<points per decade>, or a comma separated list of iterations
    #[arg(long, default_value = "all")]
    pub checkpoints: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VariationalArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum)]
    pub indicator: VariationalIndicator,
    /// Draw a random orthonormal pair of deviation vectors from this seed
    /// instead of the coordinate axes
    #[arg(long = "vector-seed")]
    pub vector_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Box of initial conditions, lo:hi per coordinate, comma separated
    #[arg(long, allow_hyphen_values = true)]
    pub region: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Half-width of the uniform noise (noise mode)
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Arithmetic of round-off mode; noise mode runs in double unless set
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: u64,
    /// lo:hi; defaults to the last decade
    #[arg(long = "fit-window")]
    pub fit_window: Option<String>,
    #[arg(long, default_value = "all")]
    pub checkpoints: String,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Two axes, axis:min:max:res,axis:min:max:res (columns first)
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Values of the remaining coordinates, k=v,...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub fixed: Vec<String>,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum)]
    pub indicator: ScanIndicator,
    #[arg(long, default_value = "single")]
    pub spec: String,
    #[arg(long = "ref-spec", default_value = "double")]
    pub ref_spec: String,
    #[arg(long, default_value = "full")]
    pub norm: String,
    #[arg(long = "vector-seed")]
    pub vector_seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long = "max-cells")]
    pub max_cells: Option<usize>,
    /// Output prefix; writes <prefix>.csv, .pgm and .json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SectionArgs {
    /// Scan matrix written by `scan`
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Scanned coordinate held fixed
    #[arg(long)]
    pub axis: String,
    #[arg(long, allow_hyphen_values = true)]
    pub value: f64,
    #[arg(long)]
    pub out: PathBuf,
}
