//! `condgen` command-line interface.
//!
//! Exit codes: 0 on success, 1 on invalid configuration or input, 2 on
//! failures during computation or output.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Run, TestKind};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "condgen", version, about = "Asset condition data generation and reliability assessment")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "condgen-out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit condition models and write them with a parameter report.
    Fit,
    /// Generate future inspections (and optionally a hypothetical cohort).
    Generate,
    /// Score generated data against held-out inspections.
    Validate {
        #[arg(long, value_enum)]
        test: TestKind,
    },
    /// Train a health-index model from labeled inspections.
    HiTrain,
    /// Apply a trained health-index model to a dataset.
    HiApply,
    /// Build health-index trajectories and simulate failures and costs.
    Simulate,
    /// Simulate each candidate annual replacement count and pick the cheapest.
    Optimize,
    /// Write a synthetic inspection cohort with a ready-to-run config.
    Fixture {
        #[arg(long, default_value_t = 1000)]
        assets: usize,
    },
}

type Action = fn(&mut Run) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    if let Command::Fixture { assets } = cli.command {
        return commands::write_fixture(&cli.out, assets, cli.seed.unwrap_or(0));
    }
    let config = cli
        .config
        .ok_or_else(|| CliError::Invalid("--config is required for this command".into()))?;
    let (name, action): (&'static str, Action) = match cli.command {
        Command::Fit => ("fit", commands::fit),
        Command::Generate => ("generate", commands::generate),
        Command::Validate { test } => {
            let mut run = Run::new("validate", &config, cli.seed)?;
            commands::validate(&mut run, test)?;
            return run.finish(&cli.out);
        }
        Command::HiTrain => ("hi-train", commands::hi_train),
        Command::HiApply => ("hi-apply", commands::hi_apply),
        Command::Simulate => ("simulate", commands::simulate),
        Command::Optimize => ("optimize", commands::optimize),
        Command::Fixture { .. } => unreachable!("handled above"),
    };
    let mut run = Run::new(name, &config, cli.seed)?;
    action(&mut run)?;
    run.finish(&cli.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
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
