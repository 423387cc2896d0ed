use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tlblock_cli::{run, Cli, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(outcome.summary.as_bytes());
            for f in &outcome.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            ExitCode::from(if outcome.passed { EXIT_OK } else { EXIT_VALIDATION })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
