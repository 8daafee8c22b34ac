//! `cqw`: command-line front end for the conformal quantum-walk simulator.

mod commands;
mod config;
mod failure;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Global;
use crate::failure::{Failure, Outcome};
use crate::validate::Fault;

#[derive(Debug, Parser)]
#[command(
    name = "cqw",
    version,
    about = "Dirac propagation on conformally flat (1+1)D spacetime by encoded quantum walks"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV and manifest output.
    #[arg(long, global = true, value_name = "PATH", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Conjugate every step instead of encoding and decoding once.
    #[arg(long, global = true)]
    per_step: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline and write snapshot CSVs.
    Simulate {
        /// Override the configured step count.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the configured sweep and write the experiment table.
    Converge {
        /// Fit synthetic quadratic data and check the recovered order.
        #[arg(long)]
        selftest_order: bool,
    },
    /// Tabulate the conformal factor and its curvature diagnostics.
    Metric,
    /// Run the built-in invariant checks.
    Validate {
        /// Print the check names without running them.
        #[arg(long)]
        list: bool,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn run(cli: Cli) -> Outcome {
    let global = Global { config: cli.config, out_dir: cli.out_dir, per_step: cli.per_step };
    match cli.command {
        Command::Simulate { steps } => commands::simulate(&global, steps),
        Command::Converge { selftest_order } => commands::converge(&global, selftest_order),
        Command::Metric => commands::metric(&global),
        Command::Validate { list, inject_fault } => {
            validate::validate(&global, list, Fault(if inject_fault { 1.01 } else { 1.0 }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.jobs {
        Some(0) => Err(Failure::Config(anyhow::anyhow!("--jobs must be at least 1"))),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(Failure::Config(e.into())),
        },
        None => run(cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("cqw: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
