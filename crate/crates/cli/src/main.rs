//! `mgpch` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgpch::copula::CopulaFamily;

use config::Method;

#[derive(Debug, Parser)]
#[command(name = "mgpch", version, about = "Volatility and covariance forecasting with mixtures of heteroscedastic Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a price file and write the model file.
    Fit(FitArgs),
    /// Write per-horizon variance (and covariance) forecasts from a model file.
    Predict(PredictArgs),
    /// Rolling-window volatility backtest.
    Backtest(BacktestArgs),
    /// Rolling-window covariance backtest with copula-coupled marginals.
    CovBacktest(CovBacktestArgs),
    /// Draw a synthetic price file from the generative model.
    Simulate(SimulateArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed for every stochastic step.
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Maximum number of worker threads.
    #[arg(long, value_name = "INT", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
}

/// Model-size flag for the subcommands that fit or sample a model.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Mixture truncation level (number of components).
    #[arg(long, value_name = "INT", value_parser = clap::value_parser!(u64).range(1..))]
    pub truncation: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Price CSV (`date` column, then one column per asset).
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output model file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also train pairwise copulas of this family.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model file written by `fit`.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Price CSV whose last return is the forecast input; defaults to the
    /// last training return.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output forecast file (JSON).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Forecast horizons in days, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
}

/// Flags shared by both backtests.
#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Price CSV.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output report file (JSON).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Forecast horizons in days, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    /// Training window length in returns.
    #[arg(long, value_name = "INT")]
    pub window: Option<usize>,
    /// Days between refits.
    #[arg(long, value_name = "INT")]
    pub retrain_every: Option<usize>,
    /// Also write the forecast log as CSV for plotting.
    #[arg(long, value_name = "PATH")]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Volatility model to evaluate.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
}

#[derive(Debug, Args)]
pub struct CovBacktestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Copula family coupling each asset pair.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Output price CSV; the ground truth goes to `<stem>.truth.json` beside it.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Number of returns to draw.
    #[arg(long, value_name = "INT")]
    pub length: Option<usize>,
    /// Number of assets.
    #[arg(long, value_name = "INT")]
    pub assets: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyArg {
    Clayton,
    Frank,
    Gumbel,
}

impl From<FamilyArg> for CopulaFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Clayton => CopulaFamily::Clayton,
            FamilyArg::Frank => CopulaFamily::Frank,
            FamilyArg::Gumbel => CopulaFamily::Gumbel,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Failure(err)) => {
            let msg = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
