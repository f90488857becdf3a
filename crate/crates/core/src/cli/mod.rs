//! Command-line scenario runner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure,
//! 4 verification failed.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod plotdata;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }

    /// Library error raised while validating inputs.
    pub fn from_config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Library error raised during computation; input-shaped errors still
    /// map to configuration errors.
    pub fn from_runtime(e: Error) -> Self {
        match e {
            Error::Expr(_)
            | Error::InvalidParameter(_)
            | Error::MissingChannel(_)
            | Error::InapplicableInvariant { .. }
            | Error::InconsistentInitialData { .. }
            | Error::NonPositiveJ { .. } => CliError::Config(e.to_string()),
            Error::Integration { ref source, .. }
                if matches!(**source, Error::InvalidParameter(_) | Error::MissingChannel(_)) =>
            {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_runtime(e)
    }
}

impl From<crate::integrator::IntegrationError> for CliError {
    fn from(e: crate::integrator::IntegrationError) -> Self {
        CliError::from_runtime(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Parser)]
#[command(
    name = "remp",
    version,
    about = "Relativistic Ermakov-Milne-Pinney scenario runner"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a system and write samples, invariants and drift reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the data behind one of the phase-space or potential figures.
    PlotData {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test the periodicity bound on random initial conditions.
    Scan {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild x(t) from the radial solution and compare with integration.
    Superpose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Integrate in rescaled time and check the relativistic equations.
    RescaleCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sample a pseudo-potential with its return points and equilibrium.
    AnalyzePotential {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::PlotData { figure, config, out } => commands::plot_data(figure, config.as_deref(), &out),
        Command::Scan { config, n, seed, out } => commands::scan(config.as_deref(), n, seed, &out),
        Command::Superpose { config, out, tol } => commands::superpose(&config, &out, tol),
        Command::RescaleCheck { config, out, tol } => commands::rescale_check(&config, &out, tol),
        Command::AnalyzePotential { config, out } => commands::analyze_potential(&config, &out),
    }
}

/// Parse `args`, run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("remp: {e}");
            e.exit_code()
        }
    }
}
