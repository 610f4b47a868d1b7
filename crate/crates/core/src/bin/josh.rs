use std::process::ExitCode;

use clap::Parser;
use josh::cli::{execute, init_logging, Cli};

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
