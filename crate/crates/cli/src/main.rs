//! `exterior-gs`: solves, mass curves, thresholds and reports from the
//! command line.

mod cache;
mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "exterior-gs",
    version,
    about = "Ground states of -Δu + λu = u^(p-1) outside a ball"
)]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for the curve refinement pass.
    #[arg(long, global = true, value_name = "K")]
    pub jobs: Option<usize>,
    /// Reuse curve points stored under `<out>/cache`.
    #[arg(long, global = true)]
    pub cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ProblemArgs {
    /// Space dimension.
    #[arg(short = 'N', long = "dim")]
    pub n: Option<usize>,
    /// Nonlinearity exponent, as a decimal or a fraction such as `10/3`.
    #[arg(short = 'p', long = "exponent", value_parser = parse_exponent)]
    pub p: Option<f64>,
    /// Radius of the excluded ball (default 1).
    #[arg(short = 'R', long = "radius")]
    pub radius: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GridArgs {
    #[arg(long = "lmin")]
    pub lambda_min: Option<f64>,
    #[arg(long = "lmax")]
    pub lambda_max: Option<f64>,
    /// Number of log-spaced λ values.
    #[arg(short = 'n', long = "points")]
    pub points: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one ground state and write it with its diagnostics.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Trace the mass curve over a λ grid and write CSV (and SVG).
    Curve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Also write an SVG plot of log d against log λ.
        #[arg(long)]
        svg: bool,
    },
    /// Existence threshold for the given (N, p, R).
    Threshold {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Stability labels along the mass curve.
    Stability {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Threshold over several radii against the scaling law.
    Scaling {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Full identity suite on one solve.
    Check {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Shooting solution against the finite-difference solver.
    CompareOracle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        lambda: Option<f64>,
        /// Finite-difference nodes (4m + 1).
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn parse_exponent(text: &str) -> Result<f64, String> {
    let bad = |_| format!("`{text}` is neither a number nor a fraction a/b");
    match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(bad)?;
            let b: f64 = b.trim().parse().map_err(bad)?;
            Ok(a / b)
        }
        None => text.trim().parse().map_err(bad),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("exterior-gs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
