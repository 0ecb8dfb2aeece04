use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = peasflow_cli::Cli::parse();
    ExitCode::from(peasflow_cli::execute(cli))
}
