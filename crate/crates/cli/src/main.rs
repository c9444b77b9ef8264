mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Common, FitArgs, SelectDimArgs, SimulateArgs, StabilityArgs};
use config::{pick, FileConfig};
use error::CliError;

/// Two-stage lasso sliced inverse regression.
///
/// Settings may also come from a flat TOML file given with `--config`;
/// its keys are the long flag names with `-` written as `_`. Flags on the
/// command line take precedence over the file.
#[derive(Debug, Parser)]
#[command(name = "slsir", version)]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files (default: slsir-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Add a wall-clock runtime column to per-replicate output.
    #[arg(long, global = true)]
    record_runtime: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo study over simulated designs.
    Simulate(SimulateArgs),
    /// Fit one estimator to data files.
    Fit(FitArgs),
    /// Select the structural dimension by clustering adjusted eigenvalues.
    SelectDim(SelectDimArgs),
    /// Stability-selection paths along the second-stage penalty.
    Stability(StabilityArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(threads) = pick(cli.threads, &file.threads) {
        if threads == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let common = Common {
        seed: pick(cli.seed, &file.seed).unwrap_or(0),
        out_dir: pick(cli.out_dir, &file.out_dir).unwrap_or_else(|| PathBuf::from("slsir-out")),
        record_runtime: cli.record_runtime || file.record_runtime.unwrap_or(false),
    };
    match cli.command {
        Command::Simulate(args) => commands::simulate(args, &file, &common),
        Command::Fit(args) => commands::fit(args, &file, &common),
        Command::SelectDim(args) => commands::select_dim(args, &file, &common),
        Command::Stability(args) => commands::stability(args, &file, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let key = e
                .get(clap::error::ContextKind::InvalidArg)
                .map(|v| v.to_string())
                .unwrap_or_else(|| "arguments".into());
            let err = CliError::Config {
                key,
                message: e.kind().to_string(),
            };
            eprintln!("{e}");
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
