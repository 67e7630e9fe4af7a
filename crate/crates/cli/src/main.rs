use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fekete_field::parallel::configure_threads;
use fekete_field_cli::{exit_code, run, Command, RunError, ScenarioConfig, Status, THREADS_ENV};

/// Electrostatics scenarios: equilibria, image charges, field scans.
///
/// Parameters are `--key value` pairs after the command (hyphens and
/// underscores are interchangeable) and/or a JSON file given with
/// `--config`; flags override the file. `--seed` and `--output-dir` are
/// accepted by every command.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// JSON scenario file (`{"parameters": {...}}` or a flat object)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Only check the scenario and print diagnostics
    #[arg(long)]
    validate: bool,

    command: Command,

    /// Command parameters as `--key value` pairs
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    params: Vec<String>,
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("field `{THREADS_ENV}`: must be a positive integer, got {v:?}")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match threads_from_env() {
        Ok(Some(n)) => {
            configure_threads(n);
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    }
    let config = match ScenarioConfig::assemble(cli.command, cli.config.as_deref(), &cli.params) {
        Ok(c) => c,
        Err(diagnostics) => {
            for d in diagnostics {
                eprintln!("error: {d}");
            }
            return ExitCode::from(2);
        }
    };
    if cli.validate {
        let diagnostics = fekete_field_cli::validate(&config);
        for d in &diagnostics {
            eprintln!("error: {d}");
        }
        return ExitCode::from(if diagnostics.is_empty() { 0 } else { 2 });
    }
    let outcome = run(&config);
    match &outcome {
        Ok(report) => {
            if let Status::NumericalFailure(reason) = &report.status {
                eprintln!("numerical failure: {reason} (partial results in {})", config.output_dir.display());
            }
            println!("{}", serde_json::to_string(&report.result).unwrap_or_default());
        }
        Err(RunError::Invalid(diagnostics)) => {
            for d in diagnostics {
                eprintln!("error: {d}");
            }
        }
        Err(RunError::Numerical(reason)) => eprintln!("numerical failure: {reason}"),
        Err(RunError::Io(reason)) => eprintln!("io error: {reason}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
