//! `estsched`: solve, simulate and check transmission schedules for remote
//! estimation over lossy links.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 mathematical
//! precondition failure, 3 invariant violation.

mod artifact;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};

use artifact::Sink;
use config::ExperimentConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "estsched", version, about = "Transmission scheduling for remote Kalman estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` without changing the echoed
    /// configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed; overrides `seed` in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Optimal schedule for `solver.beta` (or each of `solver.betas`).
    Solve,
    /// Monte Carlo run of a policy, writing summary.json and trace.csv.
    Simulate,
    /// Structural checks on the configured instance.
    Verify,
    /// Simulated DP curve against the round-robin baseline.
    Tradeoff,
    /// Optimal, constant-gain and measurement estimators on random draws.
    Table1,
    /// Measurement-transmission counterexamples.
    Counterexamples,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Tradeoff => "tradeoff",
            Command::Table1 => "table1",
            Command::Counterexamples => "counterexamples",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let sink = Sink::new(&dir, cfg.echo(), cli.quiet)?;
    sink.note(format!("{}: config {}", cli.command.name(), &sink.config_hash()[..12]));
    match cli.command {
        Command::Solve => commands::solve::run(&cfg, &sink),
        Command::Simulate => commands::simulate::run(&cfg, &sink),
        Command::Verify => commands::verify::run(&cfg, &sink),
        Command::Tradeoff => commands::tradeoff::run(&cfg, &sink),
        Command::Table1 => commands::table1::run(&cfg, &sink),
        Command::Counterexamples => commands::counterexamples::run(&sink),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("estsched: {e}");
            e.exit_code()
        }
    }
}
