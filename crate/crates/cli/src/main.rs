//! `stablasso`: simulate data, rank predictors, fit weighted penalized regressions, run
//! Stability Selection, tune the penalty and benchmark weighting schemes.

mod artifacts;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{expand_args, OUT_DIR_ENV};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "stablasso",
    version,
    about = "Rank-weighted Lasso with stability selection"
)]
struct Cli {
    /// Flat `key = value` config file (or a run manifest); explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one replicate of a simulation preset: `<preset>.csv` and `<preset>.meta.json`.
    Simulate(SimulateArgs),
    /// Air-HOLP (or fixed-penalty ridge-HOLP) ranking and the derived penalty factors.
    Rank(RankArgs),
    /// Weighted Lasso/SCAD/MCP fit at one penalty or along a path.
    Fit(FitArgs),
    /// Stability Selection profile over a penalty grid.
    Stabsel(StabselArgs),
    /// Stability-tuned penalty and the selected variables from a profile.
    Tune(TuneArgs),
    /// Precision, recall and F1 of a profile's selections against a known support.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo comparison of weighting schemes on a simulation preset.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RunArgs {
    /// Output directory; `STABLASSO_OUT_DIR` overrides the config file, flags override both.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    /// Numeric CSV with one row per observation.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column, by header name or 0-based index.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Whether the first CSV line is a header.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub header: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WeightArgs {
    /// stable, uniform, adaptive_lasso_init, adaptive_univariate, adaptive_ols,
    /// adaptive_oracle or randomized.
    #[arg(long, default_value = "stable")]
    pub weights: String,
    /// `simulate` sidecar; supplies the true coefficients for adaptive_oracle.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// lasso, scad or mcp.
    #[arg(long, default_value = "lasso")]
    pub family: String,
    #[arg(long, default_value_t = 100)]
    pub num_lambdas: usize,
    /// Smallest penalty as a fraction of lambda_max (default 0.01 when p >= n, else 1e-4).
    #[arg(long)]
    pub min_ratio: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TuneRule {
    /// `stable-1sd`, or `auto` to prefer the smallest penalty with stability >= 0.75.
    #[arg(long, default_value = "stable-1sd")]
    pub mode: String,
    /// `across-grid` (sd of the stability curve) or `at-maximum` (bootstrap sd at the peak).
    #[arg(long, default_value = "across-grid")]
    pub sd_rule: String,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// main, lowdim or lowcorr.
    #[arg(long)]
    pub preset: String,
    #[arg(long)]
    pub seed: u64,
    /// Replicate index; replicate `r` matches replicate `r` of `benchmark` with the same seed.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    /// Overrides the preset's sample size.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct RankArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Screening size d (default floor(n / ln n)).
    #[arg(long)]
    pub threshold: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub max_iter: usize,
    /// Rank by ridge-HOLP at this fixed penalty instead of Air-HOLP.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Fit at this penalty only instead of the whole path.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed for randomized and cross-validated weights.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct StabselArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub weights: WeightArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Number of half-samples.
    #[arg(long, default_value_t = 100)]
    pub b: usize,
    /// Bootstrap resamples for the stability standard deviation.
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    #[arg(long)]
    pub seed: u64,
    /// Replicate index; selects the same random streams as `benchmark`.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct TuneArgs {
    /// `profile.json` written by `stabsel`.
    #[arg(long)]
    pub profile: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub rule: TuneRule,
    /// Selection-frequency threshold.
    #[arg(long, default_value_t = 0.6)]
    pub pi_thr: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    /// `profile.json` written by `stabsel`.
    #[arg(long)]
    pub profile: PathBuf,
    /// `simulate` sidecar holding the true support.
    #[arg(long)]
    pub meta: PathBuf,
    /// Evaluate at this grid penalty instead of the tuned one.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub rule: TuneRule,
    /// Comma-separated frequency thresholds.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub thresholds: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct BenchmarkArgs {
    /// main, lowdim or lowcorr.
    #[arg(long)]
    pub preset: String,
    /// Comma-separated weighting schemes.
    #[arg(long, default_value = "stable,uniform")]
    pub schemes: String,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub b: usize,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub rule: TuneRule,
    /// Comma-separated frequency thresholds.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub thresholds: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Rank(args) => commands::rank(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Stabsel(args) => commands::stabsel(&args),
        Command::Tune(args) => commands::tune(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Benchmark(args) => commands::benchmark(&args),
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match expand_args(argv, std::env::var_os(OUT_DIR_ENV)) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.code as u8);
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
