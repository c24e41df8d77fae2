use std::process::ExitCode;

use clap::Parser;
use hev_harness::cli::Cli;
use hev_harness::commands::dispatch;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not failures
            return if e.use_stderr() { ExitCode::from(hev_harness::HarnessError::EXIT_CONFIG as u8) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli.command) {
        Ok(msg) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hevq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
