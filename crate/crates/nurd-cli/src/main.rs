//! `nurd`: generate traces, run straggler-prediction experiments, sweep
//! relaunch schedulers, and aggregate report CSVs.

mod commands;
mod config;
mod inputs;

use std::path::PathBuf;
use std::sync::OnceLock;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::KvConfig;

#[derive(Parser, Debug)]
#[command(
    name = "nurd",
    about = "Online straggler prediction and relaunch scheduling on checkpointed job traces",
    version
)]
struct Cli {
    /// Flat key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic job traces in the canonical two-file format.
    Generate(commands::generate::GenerateArgs),
    /// Run prediction experiments and emit summary/curve CSVs.
    Predict(commands::predict::PredictArgs),
    /// Run relaunch-scheduling experiments across machine counts.
    Schedule(commands::schedule::ScheduleArgs),
    /// Re-aggregate previously written per-job and outcome CSVs.
    Report(commands::report::ReportArgs),
}

/// Verbosity from NURD_LOG: off, error, warn (default), info, debug.
fn log_level() -> u8 {
    static LEVEL: OnceLock<u8> = OnceLock::new();
    *LEVEL.get_or_init(|| {
        match std::env::var("NURD_LOG")
            .unwrap_or_default()
            .to_ascii_lowercase()
            .as_str()
        {
            "off" => 0,
            "error" => 1,
            "info" => 3,
            "debug" => 4,
            _ => 2,
        }
    })
}

pub fn log_error(msg: &str) {
    if log_level() >= 1 {
        eprintln!("error: {msg}");
    }
}

pub fn log_warn(msg: &str) {
    if log_level() >= 2 {
        eprintln!("warning: {msg}");
    }
}

pub fn log_info(msg: &str) {
    if log_level() >= 3 {
        eprintln!("info: {msg}");
    }
}

pub fn log_debug(msg: &str) {
    if log_level() >= 4 {
        eprintln!("debug: {msg}");
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file_config = match &cli.config {
        Some(path) => KvConfig::load(path)?,
        None => KvConfig::default(),
    };
    match cli.command {
        Command::Generate(args) => commands::generate::run(&args, &file_config),
        Command::Predict(args) => commands::predict::run(&args, &file_config),
        Command::Schedule(args) => commands::schedule::run(&args, &file_config),
        Command::Report(args) => commands::report::run(&args, &file_config),
    }
}
