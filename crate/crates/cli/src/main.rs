mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Failure};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("selfsim: {failure}");
            ExitCode::from(failure.code())
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) | Failure::Cap(e) => write!(f, "{e:#}"),
            Failure::Property(what) => write!(f, "property check failed: {what}"),
        }
    }
}
