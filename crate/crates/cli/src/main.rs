mod args;
mod grid;
mod manifest;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use twistecho::Error;

use crate::args::Cli;
use crate::run::Completion;

/// 1 for bad input, 2 for numerical trouble.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::DegenerateWorkingPoint { .. }
            | Error::NoInflection
            | Error::DegenerateVariance
            | Error::InternalConsistency(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run::execute(cli.command) {
        Ok(Completion::Done) => ExitCode::SUCCESS,
        Ok(Completion::Partial(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
