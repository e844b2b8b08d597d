//! `umbra` — shadow-attack toolkit command line.
//!
//! Exit codes: 0 success, 2 attack failed to find an adversarial shadow,
//! 1 usage or runtime error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Seed fallback order: --seed flag, config file, UMBRA_SEED, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: &config::RunConfig) -> anyhow::Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.parsed::<u64>("seed")? {
        return Ok(s);
    }
    match std::env::var("UMBRA_SEED") {
        Ok(raw) => Ok(raw
            .parse()
            .map_err(|e| anyhow::anyhow!("UMBRA_SEED={raw:?}: {e}"))?),
        Err(_) => Ok(0),
    }
}

#[derive(Parser)]
#[command(name = "umbra", version, about = "Shadow-based black-box adversarial attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attack one image with an optimized polygonal shadow
    Attack(commands::attack::AttackArgs),
    /// Sweep attack parameters over a corpus and emit result tables
    Bench(commands::bench::BenchArgs),
    /// Simulate a sun-driven scheduled attack timeline
    Schedule(commands::schedule::ScheduleArgs),
    /// Train the built-in classifier, optionally shadow-augmented
    Train(commands::train::TrainArgs),
    /// Generate the synthetic sign corpus
    Corpus(commands::corpus::CorpusArgs),
    /// Serve a trained model over the stdio oracle protocol
    Oracle(commands::oracle::OracleArgs),
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Attack(args) => commands::attack::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::Schedule(args) => commands::schedule::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Corpus(args) => commands::corpus::run(args),
        Command::Oracle(args) => commands::oracle::run(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
