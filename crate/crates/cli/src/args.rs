use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fcca_core::fpca::{DEFAULT_GRID_POINTS, DEFAULT_HARMONICS};
use fcca_core::simulate::DEFAULT_KL_TERMS;
use fcca_core::{Mode, Model};

#[derive(Debug, Parser)]
#[command(name = "fcca", version, about = "Functional canonical and partial canonical correlation analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the CCA pair or PCCA triple model and write one CSV per process.
    Simulate(SimulateArgs),
    /// Functional principal components of one dataset.
    Fpca(FpcaArgs),
    /// Sample canonical correlations of two datasets.
    Cca(CcaArgs),
    /// Sample partial canonical correlations of two datasets given a third.
    Pcca(PccaArgs),
    /// Replicate the simulation experiment and summarise the first two correlations.
    Montecarlo(MonteCarloArgs),
    /// Randomised identity checks for the operator algebra.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report on stdout (the default when --out is absent).
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// cca-pair (x1, x2) or pcca-triple (x1 = conditioning, x2, x3).
    #[arg(long, default_value = "cca-pair")]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replication index (selects the random stream within the seed).
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Number of terms in the Karhunen–Loève expansions.
    #[arg(long, default_value_t = DEFAULT_KL_TERMS)]
    pub kl_terms: usize,
    /// Confounder loading of the first target process.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta1: f64,
    /// Confounder loading of the second target process.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub beta2: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FpcaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HARMONICS)]
    pub harmonics: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CcaArgs {
    #[arg(long)]
    pub x1: PathBuf,
    #[arg(long)]
    pub x2: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HARMONICS)]
    pub harmonics: usize,
    #[arg(long, default_value = "covariance")]
    pub mode: Mode,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PccaArgs {
    /// Conditioning dataset.
    #[arg(long)]
    pub cond: PathBuf,
    #[arg(long)]
    pub x2: PathBuf,
    #[arg(long)]
    pub x3: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HARMONICS)]
    pub harmonics: usize,
    /// Harmonics of the conditioning dataset (defaults to --harmonics).
    #[arg(long)]
    pub cond_harmonics: Option<usize>,
    #[arg(long, default_value = "covariance")]
    pub mode: Mode,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    /// cca (pair model) or pcca (triple model).
    #[arg(long, default_value = "cca")]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    pub replications: u64,
    #[arg(long, default_value_t = DEFAULT_HARMONICS)]
    pub harmonics: usize,
    #[arg(long, default_value = "covariance")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long, default_value_t = DEFAULT_KL_TERMS)]
    pub kl_terms: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta1: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub beta2: f64,
    /// Add the wall-clock runtime to the report (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Largest block dimension.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for exact matrix identities.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Tolerance for comparisons with numeric oracles.
    #[arg(long, default_value_t = 1e-8)]
    pub oracle_tol: f64,
    /// Corrupt the pair inverse inside its identity check (negative control).
    #[arg(long)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}
