use std::process::ExitCode;

use clap::Parser;
use cotagree_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source());
            ExitCode::from(e.code())
        }
    }
}
