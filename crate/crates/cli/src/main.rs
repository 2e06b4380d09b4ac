use std::process::ExitCode;

use clap::Parser;
use gaussblab_cli::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gaussblab: an asserted invariant did not hold");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("gaussblab: {e:#}");
            ExitCode::from(2)
        }
    }
}
