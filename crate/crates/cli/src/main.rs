//! `crn`: command-line front end to `crn-core`.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric failure, 4 internal
//! consistency violation.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match commands::run(&cli) {
        Ok(out) => {
            if stdout.write_all(out.as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            if let Some(partial) = &failure.partial {
                let _ = stdout.write_all(partial.as_bytes());
            }
            eprintln!("crn: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
