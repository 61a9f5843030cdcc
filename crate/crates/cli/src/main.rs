//! `bribemine`: command-line front end for the bribery-mining analyzer.

mod args;
mod commands;
mod config;
mod csvio;

use clap::Parser;

/// CLI failure classes mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or parameters (exit code 2).
    Config(String),
    /// Numerical or runtime failure (exit code 3).
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = args::Cli::parse();
    match &cli.command {
        args::Command::Analyze(a) => commands::analyze(a),
        args::Command::Sweep(a) => commands::sweep(a),
        args::Command::Simulate(a) => commands::simulate_cmd(a),
        args::Command::Dilemma(a) => commands::dilemma(a),
        args::Command::Growth(a) => commands::growth(a),
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
