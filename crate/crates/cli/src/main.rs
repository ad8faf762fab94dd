//! `mixedit` — batch command surface for the mixture-editing toolkit.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{edit, eval, generate, parse, synth_catalog, tasks, train_toy};
use config::{Ctx, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "mixedit", version, about = "Sound mixture-to-mixture editing: task space, datasets, editors, metrics")]
struct Cli {
    /// Print machine-readable JSON instead of the human-readable report.
    #[arg(long, global = true)]
    json: bool,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-task edit counts and enumerations for a composition.
    Tasks(tasks::Args),
    /// Build a dataset of (mixture, target, prompt) triples from a catalog.
    Generate(generate::Args),
    /// Edit a mixture with an action vector or a text prompt.
    Edit(edit::Args),
    /// Aggregate SNRi statistics over directories of estimates.
    Eval(eval::Args),
    /// Train the small FiLM mask network and write a checkpoint.
    TrainToy(train_toy::Args),
    /// Write the fabricated demo catalog (voices and background sounds).
    SynthCatalog(synth_catalog::Args),
    /// Parse a prompt into a simplified instruction.
    Parse(parse::Args),
}

/// An error caused by the invocation rather than by the data; exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { json: cli.json, seed: cli.seed.or(file.seed), file };
    match cli.command {
        Command::Tasks(a) => tasks::run(&ctx, a),
        Command::Generate(a) => generate::run(&ctx, a),
        Command::Edit(a) => edit::run(&ctx, a),
        Command::Eval(a) => eval::run(&ctx, a),
        Command::TrainToy(a) => train_toy::run(&ctx, a),
        Command::SynthCatalog(a) => synth_catalog::run(&ctx, a),
        Command::Parse(a) => parse::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
