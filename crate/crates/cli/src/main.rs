use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::Failure;

/// Hotelling T² charts for autocorrelated (VAR) processes.
#[derive(Debug, Parser)]
#[command(name = "t2var", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a VAR model to a `t,<vars>` CSV, choosing the order by AIC.
    Fit(FitArgs),
    /// Build a chart design (covariance, inverse, control limit) from a model.
    Design(DesignArgs),
    /// Score inspection blocks against a design; writes `t,t2,ucl,signal`.
    Monitor(MonitorArgs),
    /// Analytic ARL table for a scenario grid.
    Arl(ArlArgs),
    /// Observations chart against residuals chart for one shift.
    Compare(CompareArgs),
    /// Generate a block CSV from a model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with header `t,<name1>,...`
    data: PathBuf,
    /// Largest order tried.
    #[arg(long, default_value_t = 5)]
    p_max: usize,
    /// Fit this order instead of the AIC choice.
    #[arg(long)]
    order: Option<usize>,
    /// Subtract column means before fitting.
    #[arg(long)]
    demean: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the AIC table, residual ACFs and diagnostics.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhaseArg {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Observations,
    Residuals,
}

impl From<ModeArg> for t2var::ChartMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Observations => t2var::ChartMode::Observations,
            ModeArg::Residuals => t2var::ChartMode::Residuals,
        }
    }
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    model: PathBuf,
    /// Sample size per inspection.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0027)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Observations)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = PhaseArg::Two)]
    phase: PhaseArg,
    /// Number of Phase-I samples (required with `--phase one`).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MonitorArgs {
    #[arg(long)]
    design: PathBuf,
    /// Model the design was built from; needed for residual charts.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ArlArgs {
    #[arg(long)]
    scenarios: PathBuf,
    /// Override the grid's chart mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0027)]
    alpha: f64,
    /// Standardized shift, one value for every variable or a comma list.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    delta: Vec<f64>,
    /// Also simulate first-to-signal probabilities.
    #[arg(long)]
    fts: bool,
    #[arg(long, default_value_t = t2var::performance::DEFAULT_REPLICATIONS)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = t2var::performance::DEFAULT_MAX_CAP)]
    max_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rows per block.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Number of blocks.
    #[arg(long, conflicts_with = "length")]
    blocks: Option<usize>,
    /// Number of rows; must be a multiple of `n`.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Standardized shift, one value for every variable or a comma list.
    #[arg(long, value_delimiter = ',')]
    shift: Vec<f64>,
    /// First block that carries the shift.
    #[arg(long, default_value_t = 1)]
    shift_from: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Design(a) => commands::design(a),
        Command::Monitor(a) => commands::monitor(a),
        Command::Arl(a) => commands::arl(a),
        Command::Compare(a) => commands::compare(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("t2var: {message}");
            ExitCode::from(code)
        }
    }
}
