mod args;
mod commands;
mod output;
mod problem;

use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use args::{Cli, Command};
use commands::Outcome;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CHECK: u8 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] bicforge_core::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Core(e) => commands::exit_code(e),
        }
    }
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("BICFORGE_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("BICFORGE_JOBS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(flag.filter(|&n| n > 0)),
    }
}

fn emit<T: Serialize>(cli: &Cli, outcome: Outcome<T>) -> Result<bool, CliError> {
    let text = output::render(cli.format, &outcome.report, &outcome.table)?;
    output::write_to(cli.output.as_deref(), &text)?;
    Ok(outcome.check_failed)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    bicforge_core::linalg::sequential_kernels();
    if let Some(n) = jobs(cli.jobs)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::DeltaBound(a) => emit(cli, commands::delta_bound(a)?),
        Command::BicVerify(a) => emit(cli, commands::bic_verify(a)?),
        Command::Scan(a) => emit(cli, commands::scan(a)?),
        Command::Oracle(a) => emit(cli, commands::oracle(a)?),
        Command::KernelCheck(a) => emit(cli, commands::kernel_check(a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
