use std::process::ExitCode;

use clap::Parser;
use expsumkit_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("expsumkit: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
