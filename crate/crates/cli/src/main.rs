//! `corrwatch`: correlated anomaly detection over log and price streams.
//!
//! Exit codes: 0 success, 1 detection failure, 2 I/O error, 3 configuration error.

mod config;
mod detect;
mod input;
mod output;
mod report;
mod simulate;
mod tune;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "corrwatch",
    version,
    about = "Detect groups of anomalously correlated entities in windowed streams"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the detectors over every window and write alerts.jsonl and summary.json.
    Detect,
    /// Run a synthetic experiment: degeneration, concentration, injection or scaling.
    Simulate(simulate::SimulateArgs),
    /// Sweep r, p, alpha and ell over a corpus with injected anomalies.
    Tune(tune::TuneArgs),
    /// Summarize an alerts file into a score timeline.
    Report(report::ReportArgs),
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 3,
            error: error.into(),
        }
    }

    pub fn run(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::config)?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = RunConfig::load(&cli.overrides)?;
    set_jobs(config.jobs)?;
    match &cli.command {
        Command::Detect => detect::run(&config),
        Command::Simulate(args) => simulate::run(&config, args),
        Command::Tune(args) => tune::run(&config, args),
        Command::Report(args) => report::run(&config, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
