mod cli;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::config::UsageError;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if cause.is::<UsageError>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<ptsym_core::Error>() {
            return if e.is_input_error() { EXIT_VALIDATION } else { EXIT_NUMERICAL };
        }
    }
    EXIT_VALIDATION
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, config),
        Command::Spectrum(a) => commands::spectrum(a, config),
        Command::Classify(a) => commands::classify(a, config),
        Command::Tof(a) => commands::tof(a, config),
        Command::Sweep(a) => commands::sweep(a, config),
        Command::Boundary(a) => commands::boundary(a, config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
