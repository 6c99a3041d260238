use std::process::ExitCode;

use clap::Parser;
use horizon_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match horizon_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
