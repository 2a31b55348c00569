mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};
use semistatic::Error;

#[derive(Debug, Parser)]
#[command(name = "semistatic", version, about = "Semi-static option hedging backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate daily implied-vol surfaces and write smile data.
    Calibrate,
    /// Run the weekly hedging backtest and write daily PnL.
    Backtest,
    /// SPA tests on backtest hedge errors.
    Spa,
    /// Daily PnL attribution of target and hedges.
    Attribution,
    /// Summary table across universes from backtest output.
    Report,
    /// Write a synthetic market into the data root.
    Synth,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Market data directory (default `data`), one subdirectory per index or flat.
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,
    /// Output directory (default `output`).
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,
    /// Root seed for simulation and bootstrap streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// full, covid or START..END (YYYY-MM-DD).
    #[arg(long, global = true)]
    window: Option<String>,
    /// INDEX:call|put:ATM|ITM|OTM, comma separated or repeated.
    #[arg(long, global = true)]
    universe: Vec<String>,
    /// Model ids (e.g. static/constant_vol/linear, dynamic/linear, carr_wu) or `all`.
    #[arg(long, global = true)]
    models: Vec<String>,
    /// Proportional transaction cost in basis points of premium.
    #[arg(long, global = true)]
    cost_bps: Option<f64>,
    /// Monte Carlo scenarios per weekly build.
    #[arg(long, global = true)]
    n_paths: Option<usize>,
    /// Bootstrap replications for SPA tests.
    #[arg(long, global = true)]
    n_boot: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let c = cli.common;
    let nonempty = |v: Vec<String>| if v.is_empty() { None } else { Some(v) };
    let overrides = Overrides {
        data_root: c.data_root,
        output_root: c.output_root,
        seed: c.seed,
        window: c.window,
        universes: nonempty(c.universe),
        models: nonempty(c.models),
        cost_bps: c.cost_bps,
        n_paths: c.n_paths,
        n_boot: c.n_boot,
    };
    let result = RunConfig::load(c.config.as_deref(), overrides).and_then(|cfg| match cli.command {
        Command::Calibrate => commands::cmd_calibrate(&cfg),
        Command::Backtest => commands::cmd_backtest(&cfg),
        Command::Spa => commands::cmd_spa(&cfg),
        Command::Attribution => commands::cmd_attribution(&cfg),
        Command::Report => commands::cmd_report(&cfg),
        Command::Synth => commands::cmd_synth(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
