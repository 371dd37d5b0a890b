mod benchmark;
mod data;
mod diagnose;
mod generate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Augments collinear tabular data with Procrustes validation sets.
#[derive(Debug, Parser)]
#[command(name = "pvaug", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the data followed by generated PV-sets, plus a JSON sidecar.
    Generate(generate::Args),
    /// Check the Procrustean rules of generated PV-sets.
    Diagnose(diagnose::Args),
    /// Train networks with and without augmentation and report medians.
    Benchmark(benchmark::Args),
}

/// How a command failed; each maps to its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or inputs that do not fit together (exit 2).
    Usage(String),
    /// Anything that went wrong while working (exit 1).
    Runtime(anyhow::Error),
    /// A PV-set violated a rule (exit 3).
    Rules,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub fn usage(arg: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{arg}: {msg}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate::run(&args),
        Command::Diagnose(args) => diagnose::run(&args),
        Command::Benchmark(args) => benchmark::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Rules) => ExitCode::from(3),
    }
}
