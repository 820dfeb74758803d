//! `kl`: verify KL inequalities, estimate exact moduli, compose
//! desingularizing functions and reproduce the worked examples.

mod commands;
mod resolve;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "kl", version, about = "Desingularizing functions for the KL property")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check φ′₋(f(x) − f(x̄))·dist(0, ∂f(x)) ≥ 1 on a grid.
    Verify(VerifyArgs),
    /// Estimate the exact modulus from sampled subgradient distances.
    Modulus(ModulusArgs),
    /// Apply a calculus rule to desingularizing functions.
    Compose(ComposeArgs),
    /// Estimate the regularity constant of a family of functions.
    Alpha(AlphaArgs),
    /// Re-run a worked example from the built-in corpus.
    Reproduce(ReproduceArgs),
    /// Run the acceptance suite and print a pass/fail matrix.
    Selftest(SelftestArgs),
}

/// Where to sample: function, base point, neighbourhood and grid.
#[derive(Args, Debug, Clone)]
struct SiteArgs {
    /// Corpus id or path to an `x1,...,xn,f,dist` table.
    #[arg(long)]
    oracle: String,
    /// Base point, comma separated (default: from the corpus entry or table).
    #[arg(long, allow_hyphen_values = true)]
    xbar: Option<String>,
    /// Neighbourhood radius.
    #[arg(long)]
    eps: Option<f64>,
    /// Upper level `η` (a number or `inf`).
    #[arg(long)]
    eta: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug, Clone, Default)]
struct GridArgs {
    /// Grid points per axis (uniform) or in total (1-D log-radial).
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    grid_n: Option<u64>,
    /// Use a log-radial grid with this smallest radius.
    #[arg(long)]
    r_min: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct TableArgs {
    /// Write a `t,phi,dphi` table here.
    #[arg(long)]
    emit_table: Option<PathBuf>,
    /// Number of log-spaced rows in emitted tables.
    #[arg(long, default_value_t = 201, value_parser = clap::value_parser!(u64).range(2..))]
    table_n: u64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    site: SiteArgs,
    /// Desingularizing function: `form:key=value,...`, a JSON document, or `@path`.
    #[arg(long)]
    phi: String,
    /// Relative tolerance on the KL product.
    #[arg(long, default_value_t = kl_core::verifier::KL_TOLERANCE)]
    tol: f64,
    #[command(flatten)]
    table: TableArgs,
    /// Write the report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Estimator {
    /// Step table, constant tail: a lower estimate.
    Step,
    /// Log-log interpolation with a fitted tail.
    Smooth,
}

#[derive(Args, Debug)]
struct ModulusArgs {
    #[command(flatten)]
    site: SiteArgs,
    /// Use `n` log-spaced levels instead of every sampled gap.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    s_grid_n: Option<u64>,
    #[arg(long, value_enum, default_value_t = Estimator::Step)]
    estimator: Estimator,
    /// Also check that the estimate lies below this function on the sampled gaps.
    #[arg(long)]
    phi: Option<String>,
    #[command(flatten)]
    table: TableArgs,
    /// Write the sampled `h` as an `s,h` table.
    #[arg(long)]
    emit_h: Option<PathBuf>,
    /// Write the sample cloud (loadable again with `--oracle <path>`).
    #[arg(long)]
    emit_cloud: Option<PathBuf>,
    /// Write the estimated function as a JSON document.
    #[arg(long)]
    emit_phi: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    #[arg(value_enum)]
    rule: Rule,
    /// Input functions, in order (repeat the flag).
    #[arg(long, required = true)]
    phi: Vec<String>,
    /// Regularity constant for `sum`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Target `η` for `sepsum` (default: `inf` when every input has `η = inf`).
    #[arg(long)]
    eta: Option<String>,
    /// `f_i(x̄)` for `min`, comma separated; only the active inputs are used.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    /// `f(x̄)` for `min` (default: the smallest of `--values`).
    #[arg(long, allow_hyphen_values = true)]
    f_xbar: Option<f64>,
    /// Matrix `A` for `precompose`, rows separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Offset `b` for `precompose` (default: zero).
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<String>,
    #[command(flatten)]
    table: TableArgs,
    /// Write the composed function as a JSON document.
    #[arg(long)]
    emit_phi: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Rule {
    Sum,
    Min,
    Sepsum,
    Precompose,
}

#[derive(Args, Debug)]
struct AlphaArgs {
    /// Functions of the sum (repeat the flag); a single corpus id uses its components.
    #[arg(long, required = true)]
    oracle: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    xbar: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Seed for subsampling large tuple products.
    #[arg(long, default_value_t = kl_core::verifier::ALPHA_SEED)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Corpus id (`example-b2` is an alias of `huber_like`).
    id: String,
    /// Threshold of the Huber-like example.
    #[arg(long)]
    rho: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Run only these criteria (1-based, repeatable).
    #[arg(long)]
    only: Vec<usize>,
    /// Print the outcomes as JSON.
    #[arg(long)]
    json: bool,
}

/// Failure modes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    /// A check ran and failed: exit 1.
    Check,
    /// Bad input or a library error: exit 2.
    Usage(String),
}

impl From<kl_core::KlError> for Failure {
    fn from(e: kl_core::KlError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::Modulus(a) => commands::modulus(a),
        Command::Compose(a) => commands::compose(a),
        Command::Alpha(a) => commands::alpha(a),
        Command::Reproduce(a) => commands::reproduce(a),
        Command::Selftest(a) => commands::selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("kl: error: {msg}");
            ExitCode::from(2)
        }
    }
}
