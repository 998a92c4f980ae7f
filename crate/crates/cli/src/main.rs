mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lambda_core::galerkin::Basis;

/// Shown on every usage error.
const GRAMMAR: &str = "\
lambda [--horizon N] [--seed N] [--out PATH] [--format json|csv] [--oracle-replay LOG] <command>

commands:
  hr eval <EXPR>                                   evaluate a hyperreal expression
  oracle log [EXPR]... [--transfer FILE]           decision log of the queries they trigger
  transfer check <FILE>                            truth of each sentence in a formula file
  project --basis hat|sine --m <M> --f <EXPR>      orthogonal projection onto a level
  derive  --basis hat|sine --m <M> --f <EXPR>      generalized derivative of the projection
  variational sweep --elements <M,M,...> [--starts K]

environment: LAMBDA_HORIZON (default 100000), LAMBDA_ORACLE_SEED (default 0)";

#[derive(Parser, Debug)]
#[command(name = "lambda", version, about = "Hyperreals, transfer and ultrafunction levels at desk scale")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Oracle sampling horizon.
    #[arg(long, global = true, env = "LAMBDA_HORIZON", default_value_t = 100_000)]
    pub horizon: u64,
    /// Seed for randomized starts.
    #[arg(long, global = true, env = "LAMBDA_ORACLE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Decision log (JSON lines) whose answers are re-imposed.
    #[arg(long, global = true)]
    pub oracle_replay: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Hyperreal expressions.
    Hr {
        #[command(subcommand)]
        action: HrAction,
    },
    /// Oracle inspection.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Bounded-formula transfer.
    Transfer {
        #[command(subcommand)]
        action: TransferAction,
    },
    /// Project a function onto a level.
    Project(LevelArgs),
    /// Generalized derivative of a function's projection.
    Derive(LevelArgs),
    /// The nonconvex variational example.
    Variational {
        #[command(subcommand)]
        action: VariationalAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum HrAction {
    Eval { expr: String },
}

#[derive(Subcommand, Debug)]
pub enum OracleAction {
    Log {
        exprs: Vec<String>,
        /// Also check every sentence of this formula file.
        #[arg(long)]
        transfer: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum TransferAction {
    Check { file: PathBuf },
}

#[derive(Args, Debug)]
pub struct LevelArgs {
    #[arg(long, value_parser = parse_basis, default_value = "hat")]
    pub basis: Basis,
    #[arg(long)]
    pub m: usize,
    /// Function of x.
    #[arg(long)]
    pub f: String,
}

fn parse_basis(s: &str) -> Result<Basis, String> {
    s.parse().map_err(|e: lambda_core::galerkin::GalerkinError| e.to_string())
}

#[derive(Subcommand, Debug)]
pub enum VariationalAction {
    Sweep {
        /// Even element counts, strictly increasing, at least four.
        #[arg(long, value_delimiter = ',', required = true)]
        elements: Vec<usize>,
        /// Random starts per level in addition to the sawtooth and zero.
        #[arg(long, default_value_t = 4)]
        starts: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { message: String, grammar: &'static str },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage {
            message: message.into(),
            grammar: GRAMMAR,
        }
    }

    pub fn usage_with(message: impl Into<String>, grammar: &'static str) -> Self {
        CliError::Usage {
            message: message.into(),
            grammar,
        }
    }

    pub fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("\n{GRAMMAR}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage { message, grammar }) => {
            eprintln!("error: {message}\n\n{grammar}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
