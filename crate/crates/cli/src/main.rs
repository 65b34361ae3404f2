mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations; exit status 2.
    Usage(String),
    /// Failure while doing the work; exit status 1.
    Runtime(od2rnn_core::Error),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<od2rnn_core::Error> for CliError {
    fn from(e: od2rnn_core::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn fail(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        CliError::Runtime(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::run(cli.command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
