//! `beckner <subcommand> <config.json>`: batch front-end for the laboratory.
//!
//! Exit status: 0 success, 1 output failure, 2 configuration error,
//! 3 capacity error, 4 inadmissible system, 5 numeric failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{Command, Ctx};
use config::RunConfig;
use error::{config_error, CliError};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "BECKNER_THREADS";

#[derive(Parser)]
#[command(name = "beckner", version, about)]
struct Cli {
    command: Command,
    /// JSON run configuration.
    config: PathBuf,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| config_error(format!("{THREADS_VAR} = `{raw}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(format!("cannot start {n} threads: {e}")))
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    init_threads()?;
    let cfg = RunConfig::load(&cli.config)?;
    let ctx = Ctx::new(cfg)?;
    commands::run(cli.command, &ctx)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
