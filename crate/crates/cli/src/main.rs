//! `beliefagg`: solve, evaluate and diagnose feature-based belief
//! aggregation for POMDPs from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 value iteration did not
//! converge, 3 a diagnosed bound was violated, 4 configuration error.

mod commands;
mod inputs;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_BOUND_VIOLATED: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

/// An error in the user's arguments or input files.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn wrap(e: beliefagg::Error) -> anyhow::Error {
        ConfigError(e.to_string()).into()
    }

    pub fn wrap_any(e: anyhow::Error) -> anyhow::Error {
        ConfigError(format!("{e:#}")).into()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "beliefagg",
    version,
    about = "Feature-based belief aggregation for POMDPs"
)]
struct Cli {
    /// Number of worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for output files whose path is not given explicitly.
    #[arg(long, global = true, env = "BELIEFAGG_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the aggregate problem and write the solution file.
    Solve(SolveArgs),
    /// Simulate the one-step lookahead policy of a solution.
    Evaluate(EvaluateArgs),
    /// Compare solutions against a reference optimal cost and check the bounds.
    Diagnose(DiagnoseArgs),
    /// Write a problem (and optionally its feature scheme) as JSON.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Preset (`treasure:N=3`, `rocksample:4x4`, ...) or JSON problem file.
    #[arg(long)]
    pub problem: String,

    /// Feature scheme: a preset name (`max-value`, `grouped:L`, `flat`,
    /// `grid3x3`, ...) or a JSON scheme file.
    #[arg(long)]
    pub features: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Aggregation rule: `nearest` (alias `hard`) or `convex`.
    #[arg(long, default_value = "nearest")]
    pub psi: String,

    #[arg(long, value_enum, default_value_t = ModeArg::Sync)]
    pub mode: ModeArg,

    #[arg(long, value_enum, default_value_t = ExpansionArg::Eager)]
    pub expansion: ExpansionArg,

    /// Seed belief for lazy expansion: `initial`, `uniform`, `state:I` or a
    /// JSON file; may be repeated.
    #[arg(long)]
    pub seed_belief: Vec<String>,

    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,

    #[arg(long, default_value_t = 100_000)]
    pub max_sweeps: usize,

    /// Refuse to build tables larger than this.
    #[arg(long)]
    pub table_limit: Option<usize>,

    /// Unbiased solution file whose approximation is used as the bias.
    #[arg(long)]
    pub bias: Option<PathBuf>,

    /// Feature scheme of the bias solution (defaults to `--features`).
    #[arg(long)]
    pub bias_features: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpansionArg {
    Eager,
    Lazy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Grid resolution.
    #[arg(long)]
    pub rho: u32,

    /// Solution file (default `solution.json` in the output directory).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Solution file; required by the lookahead policy.
    #[arg(long)]
    pub solution: Option<PathBuf>,

    /// Bias solution the evaluated solution was computed with.
    #[arg(long)]
    pub bias: Option<PathBuf>,

    #[arg(long)]
    pub bias_features: Option<String>,

    /// `lookahead`, or `constant:C` to apply control C (name or index) always.
    #[arg(long, default_value = "lookahead")]
    pub policy: String,

    /// Starting belief: `initial`, `uniform`, `state:I` or a JSON file.
    #[arg(long, default_value = "initial")]
    pub initial_belief: String,

    /// Belief tracking in simulation: `exact` or `particle[:COUNT]`.
    #[arg(long, default_value = "exact")]
    pub estimator: String,

    #[arg(long, default_value_t = 100)]
    pub horizon: usize,

    #[arg(long, default_value_t = 1000)]
    pub trials: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Also write the trajectory of trial 0 as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Grid resolutions to sweep, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rho: Vec<u32>,

    /// Reference cost: `grid` or `grid:RHO0` (fine-grid solve of the flat
    /// scheme), or `product` (exact, treasure presets only).
    #[arg(long, default_value = "grid")]
    pub oracle: String,

    /// Random beliefs drawn per resolution for the `grid` oracle.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,

    /// Steps per site of the belief grid used with the `product` oracle
    /// (default 200 for one site, 10 otherwise).
    #[arg(long)]
    pub grid_steps: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Allowed oracle error when checking the bounds.
    #[arg(long, default_value_t = 1e-3)]
    pub slack: f64,

    /// Also write per-belief approximate and reference costs as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Problem file (default `problem.json` in the output directory).
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Also write the feature scheme here.
    #[arg(long)]
    pub scheme_output: Option<PathBuf>,
}

/// Library errors that stem from the user's request rather than a failure
/// while carrying it out.
fn is_config_error(e: &beliefagg::Error) -> bool {
    use beliefagg::Error::*;
    matches!(
        e,
        InvalidArgument(_)
            | InvalidModel(_)
            | InvalidScheme(_)
            | GridOverflow { .. }
            | InfeasibleOracle(_)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let out_dir = cli.out_dir.as_deref();
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a, out_dir),
        Command::Evaluate(a) => commands::evaluate(a, out_dir),
        Command::Diagnose(a) => commands::diagnose(a, out_dir),
        Command::Export(a) => commands::export(a, out_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<ConfigError>().is_some()
                || e.downcast_ref::<beliefagg::Error>()
                    .is_some_and(is_config_error);
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
