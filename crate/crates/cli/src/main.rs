mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit code for errors caused by bad input.
const EXIT_USAGE: u8 = 2;
/// Exit code for simulation, planning or fidelity failures.
const EXIT_FAILURE: u8 = 1;

/// Bad input: a usage or validation problem.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<spinforge::Error>() {
        Some(
            spinforge::Error::Index { .. }
            | spinforge::Error::Validation(_)
            | spinforge::Error::Parse { .. }
            | spinforge::Error::Config { .. }
            | spinforge::Error::Routing(_)
            | spinforge::Error::IncompleteTable(_),
        ) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
