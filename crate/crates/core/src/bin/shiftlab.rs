use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use shiftlab::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let body = outcome.render(cli.format);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, body) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
            println!("{}", outcome.verdict());
        }
        None => {
            // Keep stdout machine-readable; the verdict goes to stderr.
            let mut out = std::io::stdout().lock();
            if out.write_all(body.as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            eprintln!("{}", outcome.verdict());
        }
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
