//! Scenario runner for `sympdiss`: JSON configs in, trajectories and check
//! reports out.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{check_bipotential, list, refine, run, Outcome, RunReport};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sympdiss", version, about = "Dissipative Hamiltonian scenario runner")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for sampled checks; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and check the balance laws.
    Run {
        /// Scenario to run with defaults when no config is given.
        scenario: Option<String>,
    },
    /// Repeat a run with h, h/2, ... and tabulate residuals and errors.
    Refine {
        scenario: Option<String>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Print the registered scenarios.
    List,
    /// Sampled axiom check of a scenario's bipotential.
    CheckBipotential { scenario: Option<String> },
}

fn load_config(cli: &Cli, scenario: Option<&str>) -> CliResult<RunConfig> {
    let mut config = match (&cli.config, scenario) {
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::for_scenario(name),
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either --config or a scenario name, not both".into()))
        }
        (None, None) => return Err(CliError::Config("missing --config (or a scenario name)".into())),
    };
    config.apply_seed(cli.seed);
    Ok(config)
}

fn out_dir(cli: &Cli, config: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Dispatch a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Run { scenario } => {
            let config = load_config(cli, scenario.as_deref())?;
            run(&config, &out_dir(cli, Some(&config)))
        }
        Command::Refine { scenario, levels } => {
            let config = load_config(cli, scenario.as_deref())?;
            refine(&config, *levels, &out_dir(cli, Some(&config)))
        }
        Command::List => list(),
        Command::CheckBipotential { scenario } => {
            let config = load_config(cli, scenario.as_deref())?;
            check_bipotential(&config, cli.seed, &out_dir(cli, Some(&config)))
        }
    }
}
