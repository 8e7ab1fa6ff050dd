mod cli;
mod commands;
mod config;
mod error;
mod fsio;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use cli::Cli;
use error::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::merge_config(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error[{}]: {msg}", e.category());
    ExitCode::FAILURE
}

#[cfg(feature = "parallel")]
fn run(cli: Cli) -> Result<(), CliError> {
    let workers = cli
        .workers
        .map(|n| n as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {workers} workers: {e}")))?;
    log::info!("using {workers} worker(s)");
    pool.install(|| commands::dispatch(cli.command))
}

#[cfg(not(feature = "parallel"))]
fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers.is_some_and(|n| n > 1) {
        log::warn!("built without parallel support; running on one worker");
    }
    commands::dispatch(cli.command)
}
