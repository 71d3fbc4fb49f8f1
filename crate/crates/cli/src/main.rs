//! `seeker`: train, score, evaluate and synthesize skeleton anomaly data.

mod eval;
mod io;
mod score;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Environment variable capping worker threads.
const THREADS_ENV: &str = "SEEKER_THREADS";

#[derive(Parser, Debug)]
#[command(name = "seeker", version, about = "Sequential keypoint density estimator for skeleton anomaly detection")]
struct Cli {
    /// Re-run the command recorded in a `run_config.json` echo.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Fit a model to normal pose tracks.
    Train(train::TrainArgs),
    /// Score pose tracks with a trained model.
    Score(score::ScoreArgs),
    /// Compute metrics from scores and ground-truth labels.
    Eval(eval::EvalArgs),
    /// Generate synthetic walking scenes with labeled anomalies.
    Synth(synth::SynthArgs),
}

impl Command {
    fn run(&self) -> Result<()> {
        match self {
            Command::Train(a) => train::run(a, self),
            Command::Score(a) => score::run(a, self),
            Command::Eval(a) => eval::run(a, self),
            Command::Synth(a) => synth::run(a, self),
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn resolve(cli: Cli) -> Result<Command> {
    match (cli.config, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing run config {}", path.display()))
        }
        (None, Some(cmd)) => Ok(cmd),
        (Some(_), Some(_)) => bail!("--config replays a recorded run and cannot be combined with a subcommand"),
        (None, None) => bail!("a subcommand (train, score, eval, synth) or --config is required"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| resolve(cli)).and_then(|cmd| cmd.run());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
