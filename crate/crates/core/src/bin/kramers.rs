use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kramers::cli::{run, Command};
use kramers::config::{workers_from_env, ExperimentConfig, WORKERS_ENV};
use kramers::ensemble::with_workers;

/// Mean-field Langevin simulation, large-friction limit and bound checks.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 bad config,
/// 3 runtime error.
#[derive(Parser)]
#[command(version, about, long_about = None, after_help = format!("Set {WORKERS_ENV} to choose the worker-thread count."))]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one system and write its paths.
    Simulate(Args),
    /// Strong-error rate study over `sim.beta_grid`.
    Converge(Args),
    /// Monte-Carlo checks of every moment bound.
    ValidateBounds(Args),
    /// Compare the time-changed unscaled system with the direct one.
    ScalingCheck(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML experiment config.
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Converge(a) => (Command::Converge, a),
        Cmd::ValidateBounds(a) => (Command::ValidateBounds, a),
        Cmd::ScalingCheck(a) => (Command::ScalingCheck, a),
    };
    let loaded = workers_from_env().and_then(|w| Ok((w, ExperimentConfig::load(&args.config)?)));
    let (workers, config) = match loaded {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = args.out.unwrap_or_else(|| config.output.dir.clone());
    let go = || run(command, &config, &dir, workers);
    let result = match workers {
        Some(n) => with_workers(n, go),
        None => go(),
    };
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ kramers::Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
