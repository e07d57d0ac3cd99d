mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Status;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Moments(a) => commands::moments(a),
        Command::NaCheck(a) => commands::na_check(a),
        Command::Baseline(a) => commands::baseline(a),
    };
    match result {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Incomplete(why)) => {
            eprintln!("rtclt: incomplete: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("rtclt: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
