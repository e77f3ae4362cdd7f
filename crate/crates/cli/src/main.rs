mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use opfbasis::TableFormat;

use config::{ExperimentArgs, ExperimentConfig};

/// Learn the optimal bases of an uncertain DC optimal power flow and evaluate
/// ensemble policies built from them.
///
/// Exit status: 0 on success, 1 on error, 2 when the coverage test is inconclusive.
#[derive(Debug, Parser)]
#[command(name = "opfbasis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample scenarios, collect optimal bases and test coverage.
    Learn(ExperimentArgs),
    /// Evaluate a stored ensemble on fresh scenarios.
    Evaluate {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Ensemble file written by `learn`.
        #[arg(long)]
        ensemble: PathBuf,
    },
    /// `learn` followed by `evaluate` on its ensemble.
    Run(ExperimentArgs),
    /// Merge report files of several runs into one set of tables.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "text")]
        format: String,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the size of each case.
    Summary {
        #[arg(required = true)]
        cases: Vec<PathBuf>,
    },
}

fn setup(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::resolve(args)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Learn(args) => {
            let (verdict, _) = commands::learn(&setup(&args)?)?;
            Ok(commands::exit_code(verdict.outcome))
        }
        Command::Evaluate { args, ensemble } => {
            commands::evaluate(&setup(&args)?, &ensemble)?;
            Ok(0)
        }
        Command::Run(args) => {
            let cfg = setup(&args)?;
            let (verdict, ensemble) = commands::learn(&cfg)?;
            commands::evaluate(&cfg, &ensemble)?;
            Ok(commands::exit_code(verdict.outcome))
        }
        Command::Report {
            reports,
            format,
            out,
        } => {
            let doc = commands::report(&reports, format.parse::<TableFormat>()?)?;
            match out {
                Some(path) => std::fs::write(&path, doc)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{doc}"),
            }
            Ok(0)
        }
        Command::Summary { cases } => {
            print!("{}", commands::summary(&cases)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
