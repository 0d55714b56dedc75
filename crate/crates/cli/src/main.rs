mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Failure;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::configure(&cli).and_then(|pool| {
        pool.install(|| match &cli.command {
            Command::Explain(a) => commands::explain(a),
            Command::Verify(a) => commands::verify(a),
            Command::Fidelity(a) => commands::fidelity(a),
            Command::EnumerateStructure(a) => commands::enumerate_structure(a),
        })
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("distval: {message}");
            ExitCode::from(code)
        }
    }
}
