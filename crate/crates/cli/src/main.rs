//! `jgmc`: generate scenarios, solve graph pairs, score results and plot sweeps.

mod commands;
mod files;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "jgmc", version, about = "Joint graph matching and two-way clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write graph pairs with ground truth for a scenario (one pair per noise level).
    Generate(commands::GenerateArgs),
    /// Match and cluster one graph pair.
    Solve(commands::SolveArgs),
    /// Score results against ground truth and append CSV rows.
    Eval(commands::EvalArgs),
    /// Draw metric-versus-noise curves from a CSV file.
    Plot(commands::PlotArgs),
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<jgmc_core::CoreError> for CliError {
    fn from(e: jgmc_core::CoreError) -> Self {
        use jgmc_conic::ConicError;
        use jgmc_core::CoreError as E;
        let code = match &e {
            E::Numerical(_) | E::Conic(ConicError::Factorization(_)) | E::Conic(ConicError::NonFinite) => 4,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(format!("malformed JSON: {e}"))
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jgmc: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
