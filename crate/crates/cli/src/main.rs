//! `fxlv` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "fxlv", version, about = "FX local volatility calibration and exotic pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the vol matrix for calendar and butterfly consistency.
    Validate(Common),
    /// Fit the local volatility surface to the vol matrix.
    Calibrate(Common),
    /// Price the deal file on a calibrated surface.
    Price(Common),
    /// Reprice the deals across grid sizes and path counts.
    Converge(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Calibrate even if the market fails validation.
    #[arg(long)]
    force: bool,
    /// Overrides the seed for calibration and pricing.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

type Handler = fn(&RunConfig, bool) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, command): (&Common, Handler) = match &cli.command {
        Command::Validate(c) => (c, commands::validate),
        Command::Calibrate(c) => (c, commands::calibrate),
        Command::Price(c) => (c, commands::price),
        Command::Converge(c) => (c, commands::converge),
    };
    let mut config = RunConfig::load(&common.config).map_err(Failure::Input)?;
    config.apply_overrides(common.seed, common.out.clone());
    config.check().map_err(Failure::Input)?;
    commands::write_resolved_config(&config)?;
    command(&config, common.force)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
