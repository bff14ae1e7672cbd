//! `cachecast` experiment driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Overrides};

#[derive(Parser)]
#[command(name = "cachecast", version, about = "Coded caching over block-fading broadcast channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate-memory points and frontiers (points.csv, frontier.csv).
    Rates(Common),
    /// Bit-level delivery simulation (transcript.csv, report.json).
    Simulate(Common),
    /// Symmetry, placement and waterfilling self-checks.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// Config file, or the name of a bundled config (fig1, two-state, asymmetric).
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out/<config name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo samples for fading expectations.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, cmd): (&Common, fn(&config::Experiment) -> Result<(), CliError>) = match &cli.command {
        Command::Rates(c) => (c, commands::cmd_rates),
        Command::Simulate(c) => (c, commands::cmd_simulate),
        Command::Check(c) => (c, commands::cmd_check),
    };
    let mut exp = config::load(&common.config).map_err(|e| CliError::Config(e.0))?;
    Overrides {
        seed: common.seed,
        out: common.out.clone(),
        samples: common.samples,
        trials: common.trials,
    }
    .apply(&mut exp)?;
    cmd(&exp)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cachecast: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
