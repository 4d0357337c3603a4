//! Command-line front end: `capacity`, `energy`, `minimize`, `verify` and
//! `sequence`, each driven by a scenario config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use commands::{Output, SELECTORS};
use config::{Scenario, ScenarioConfig};
use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "electroelastic", version, about = "Equilibria of charged deformable conductors")]
struct Cli {
    /// Scenario config (TOML). Defaults apply to every key left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config. Default `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relative or self capacity of configured shapes or of the deformed conductor.
    Capacity,
    /// Energy breakdown of a deformation.
    Energy {
        /// Deformation file; defaults to the configured start.
        #[arg(long)]
        deformation: Option<PathBuf>,
    },
    /// Minimize the configured functional from the configured start.
    Minimize,
    /// Run property checks.
    Verify {
        #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(SELECTORS))]
        property: String,
    },
    /// Capacities along a shrinking-bump sequence, with the regularity closure check.
    Sequence,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let scn = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::from_config(ScenarioConfig::default(), PathBuf::new())?,
    };
    let seed = cli.seed.unwrap_or(scn.config.seed);
    let dir = cli.out.clone().or_else(|| scn.config.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Output::new(&dir);
    let result = match &cli.command {
        Command::Capacity => commands::capacity(&scn, &mut out),
        Command::Energy { deformation } => commands::energy(&scn, deformation.as_deref(), &mut out),
        Command::Minimize => commands::minimize_cmd(&scn, seed, &mut out),
        Command::Verify { property } => commands::verify(&scn, property, seed, &mut out),
        Command::Sequence => commands::sequence(&scn, &mut out),
    };
    match result {
        Ok(text) => {
            out.write()?;
            print!("{text}");
            Ok(())
        }
        Err(CliError::InfiniteEnergy(reason)) => {
            out.write()?;
            Err(CliError::InfiniteEnergy(reason))
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::SUCCESS as u8 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
