use std::process::ExitCode;

use clap::Parser;
use coexsim::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
