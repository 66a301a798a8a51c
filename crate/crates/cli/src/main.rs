use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use quadmetric_cli::input::InputError;
use quadmetric_cli::report::digest;
use quadmetric_cli::{Cli, Outcome};
use serde_json::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Usage errors still produce a parseable report.
            let _ = e.print();
            let err = InputError::Option(e.kind().to_string());
            let outcome = Outcome::input_error("usage", digest("usage", &[], &json!({})), &err);
            print!("{}", outcome.to_json());
            return ExitCode::from(2);
        }
    };
    let outcome = cli.command.run();
    let text = outcome.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    if let Some(err) = outcome.report.results.get("error").and_then(|v| v.as_str()) {
        eprintln!("error: {err}");
    }
    ExitCode::from(outcome.code())
}
