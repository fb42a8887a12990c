//! `sounder`: filter-bank design, noise budgets, synthetic flights and
//! flight-data reduction.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 a channel
//! failed to converge, 3 no complete chop cycles. Set `SOUNDER_LOG` (for
//! example `info` or `debug`) for more logging on standard error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sounder", version, about = "Millimeter-wave spectrometer design and data reduction")]
struct Cli {
    /// Warn about unknown configuration keys instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize channels, assemble the bank and export its response.
    Design {
        #[arg(long)]
        band: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Search inter-channel spacings before assembling.
        #[arg(long)]
        optimize: bool,
    },
    /// Print and export the per-stage noise budget of a receiver chain.
    Budget {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a synthetic flight timestream with its truth record.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deglitch, demodulate and calibrate a timestream.
    Process {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cal: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOUNDER_LOG", "warn"))
        .target(env_logger::Target::Stderr)
        .init();
    // clap's own usage-error status would collide with exit code 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Design { band, out, optimize } => commands::design(band, out, *optimize, cli.lenient),
        Command::Budget { chain, out } => commands::budget(chain, out, cli.lenient),
        Command::Simulate { scenario, out } => commands::simulate(scenario, out, cli.lenient),
        Command::Process { input, cal, config, out } => commands::process(input, cal, config, out, cli.lenient),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
