use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pmst", version, about = "Self-testing witnesses for qubit prepare-and-measure scenarios")]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Build a witness bundle from target states.
    Construct(ConstructArgs),
    /// Bound a witness for classical, real-qubit and complex-qubit models.
    Bounds(BoundsArgs),
    /// Simulate finite-shot circuits and estimate the witness.
    Simulate(SimulateArgs),
    /// Certify count data against the classical and real-qubit thresholds.
    Certify(CertifyArgs),
    /// Check numerically that the witness optimum is unique.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Method {
    #[value(name = "4x3")]
    #[serde(rename = "4x3")]
    FourByThree,
    #[value(name = "general")]
    #[serde(rename = "general")]
    General,
    #[value(name = "4x6")]
    #[serde(rename = "4x6")]
    Pairwise,
    #[value(name = "umbrella")]
    #[serde(rename = "umbrella")]
    Umbrella,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstructArgs {
    #[arg(long, value_enum)]
    pub method: Method,

    /// JSON file with `states` (Bloch triples) and optionally `r`, `p` or a
    /// `povm` given as `weights` and `directions`.
    #[arg(long)]
    pub states: Option<PathBuf>,

    /// Umbrella parameter in [0, 3].
    #[arg(long)]
    pub c: Option<f64>,

    /// Row weights of the general construction (overrides the file).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub r: Option<Vec<f64>>,

    /// Explicit null combination for the 4x3 construction (overrides the file).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Option<Vec<f64>>,

    /// Append negated rows so that every column sums to zero.
    #[arg(long)]
    pub double: bool,

    /// Negate rows with negative null-combination weights (4x6 from states).
    #[arg(long)]
    pub allow_sign_flip: bool,

    /// Weight of the POVM penalty term.
    #[arg(long)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Classical,
    Real,
    Complex,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundsArgs {
    /// Witness bundle to bound.
    #[arg(long, conflicts_with = "umbrella_sweep")]
    pub bundle: Option<PathBuf>,

    /// Sweep the umbrella family over a grid of c and write a CSV.
    #[arg(long)]
    pub umbrella_sweep: bool,

    /// Grid spacing of the sweep.
    #[arg(long, default_value_t = 0.25)]
    pub c_step: f64,

    #[arg(long, value_enum, default_value_t = ModelArg::All)]
    pub model: ModelArg,

    /// See-saw starts; defaults to 64 (complex) and 256 (real).
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "umbrella_c", conflicts_with = "umbrella_c")]
    pub bundle: Option<PathBuf>,

    #[arg(long)]
    pub umbrella_c: Option<f64>,

    #[arg(long, default_value_t = 8192)]
    pub shots: u64,

    /// State visibility; 1 is noiseless, 0 fully depolarised.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    /// Counts file with header `x,y,b,count`.
    #[arg(long)]
    pub counts: PathBuf,

    /// Umbrella parameter; taken from the bundle when omitted.
    #[arg(long)]
    pub c: Option<f64>,

    /// Witness bundle, for witnesses other than the umbrella family.
    #[arg(long)]
    pub bundle: Option<PathBuf>,

    #[arg(long, default_value_t = pmst_core::certify::DEFAULT_Z_MIN, allow_negative_numbers = true)]
    pub zmin: f64,

    /// Recompute the real-qubit threshold with the optimizer.
    #[arg(long)]
    pub recompute: bool,

    #[arg(long, default_value_t = pmst_core::bounds::DEFAULT_REAL_STARTS)]
    pub starts: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub bundle: PathBuf,

    #[arg(long, default_value_t = 64)]
    pub trials: usize,
}
