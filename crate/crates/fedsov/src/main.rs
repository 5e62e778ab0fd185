use std::process::ExitCode;

use clap::Parser;
use fedsov::cli::{execute, render, Cli};
use serde_json::json;

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end()),
    };
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => return fail("runtime", &format!("{e:#}")),
    };
    match render(&outcome.rows, cli.format) {
        Ok(text) => println!("{text}"),
        Err(e) => return fail("runtime", &format!("{e:#}")),
    }
    ExitCode::from(outcome.code as u8)
}
