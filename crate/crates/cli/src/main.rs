//! `zetamix`: evaluate, verify, tabulate and sample the Zeta mixture
//! constructions.
//!
//! Exit codes: 0 success, 1 an identity check failed, 2 invalid usage or
//! parameters, 3 quadrature did not converge.

mod commands;
mod format;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "zetamix", version, about = "Zeta distribution as Negative Binomial and Poisson mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a density or mass function at one or more points.
    Eval(EvalArgs),
    /// Run the identity verification grid and print its JSON report.
    Verify(VerifyArgs),
    /// Tabulate a density over an evenly spaced grid.
    Tabulate(TabulateArgs),
    /// Draw Zeta counts through one of the sampling chains.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    ZetaPmf,
    NbPmf,
    PoissonPmf,
    YulePmf,
    MixingR1,
    MixingR2,
    MixingRGt1,
    MixingQuasi,
    GammaTransform,
    LambdaMixing,
    LambdaMixingViaR,
    NbMixture,
    PoissonMixture,
    GammaPoisson,
    YuleMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChainArg {
    Direct,
    Geometric,
    Poisson,
}

#[derive(Debug, Clone, Args)]
pub struct Params {
    /// Zeta shape, s > 1.
    #[arg(long)]
    pub s: Option<f64>,
    /// Negative Binomial shape.
    #[arg(long)]
    pub r: Option<f64>,
    /// Yule shape.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct QuadratureArgs {
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_subdivisions: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[command(flatten)]
    pub params: Params,
    /// Count points, for mass functions and mixtures.
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<u64>,
    /// Points in (0, 1), for densities over p; doubles as the success
    /// probability of nb-pmf and gamma-poisson.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Vec<f64>,
    /// Rate points, for the lambda densities and poisson-pmf.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Points gamma > 1, for gamma-transform.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Vec<f64>,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Grid configuration file; the default grid when omitted.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// `json` writes the full report; `csv` one row per check.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct TabulateArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[command(flatten)]
    pub params: Params,
    /// Fixed success probability for nb-pmf and gamma-poisson.
    #[arg(long)]
    pub p: Option<f64>,
    /// Fixed rate for poisson-pmf.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    /// Number of grid points; ignored for count kinds, which use every
    /// integer in [from, to].
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Space the points evenly in log10.
    #[arg(long)]
    pub log: bool,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub chain: ChainArg,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Tail mass beyond the fit's truncation point.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Also write the observed and expected counts as CSV.
    #[arg(long)]
    pub fit_table: Option<std::path::PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => commands::eval(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Tabulate(args) => commands::tabulate(&args),
        Command::Sample(args) => commands::sample(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl From<ChainArg> for zetamix::sampling::Chain {
    fn from(c: ChainArg) -> Self {
        match c {
            ChainArg::Direct => Self::Direct,
            ChainArg::Geometric => Self::Geometric,
            ChainArg::Poisson => Self::Poisson,
        }
    }
}
