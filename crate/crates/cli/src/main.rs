//! `cellulat`: command-line front end to the simulation engine.
//!
//! Exit codes: 0 success, 1 unreadable or unwritable file, 2 invalid model,
//! stimulus or lesion, 64 malformed command line.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Validate { model } => commands::validate(&model),
        Command::LesionCompare(a) => commands::lesion_compare(a),
        Command::Fmt { model } => commands::fmt(&model),
        Command::Columns { model } => commands::columns(&model),
        Command::Scenario { name } => commands::scenario(&name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Invalid(_)) {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}
