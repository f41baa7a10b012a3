//! `meancurv` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 check failure,
//! 3 solver failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Check(String),
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Check(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Check(m) => write!(f, "check failure: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "meancurv", version, about = "Prescribed boundary mean curvature on the ball, axisymmetric case")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the numerical verification suite.
    Verify(Common),
    /// Solve for one exponent p.
    Solve(Common),
    /// Continue a solution branch over an exponent schedule.
    Continue(Common),
    /// Sign-change test and flatness table for the profile.
    Kwcheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ambient dimension of the ball.
    #[arg(long)]
    n: Option<usize>,
    /// Number of quadrature nodes.
    #[arg(long)]
    grid: Option<usize>,
    /// Exponent for `solve`.
    #[arg(long)]
    p: Option<f64>,
    /// Builtin profile and parameters, e.g. `--profile two_bump alpha=1.5 a=0.5`.
    #[arg(long, num_args = 1.., value_name = "NAME [K=V]...")]
    profile: Option<Vec<String>>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let ov = Overrides { n: self.n, grid: self.grid, p: self.p, out: self.out.clone(), profile: self.profile.clone() };
        RunConfig::load(self.config.as_deref(), &ov)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(c) => commands::verify(&c.load()?),
        Command::Solve(c) => commands::solve(&c.load()?),
        Command::Continue(c) => commands::continue_run(&c.load()?),
        Command::Kwcheck(c) => commands::kwcheck(&c.load()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meancurv: {e}");
            ExitCode::from(e.code())
        }
    }
}
