//! `iqcert` — certify linear convergence rates for first-order methods and
//! their projected variants, simulate trajectories, and run the invariant
//! suites from the command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 no certificate found,
//! 3 numerical failure, 4 property violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod csvio;

use commands::CommonOpts;

/// CLI-level error, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    NoCertificate(String),
    Numeric(String),
    PropertyViolation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::NoCertificate(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::PropertyViolation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::NoCertificate(m)
            | CliError::Numeric(m)
            | CliError::PropertyViolation(m) => m,
        }
    }
}

/// Map library errors onto exit-code categories: a failed bisection is "no
/// certificate", runtime breakdowns are "numerical failure", and anything
/// about malformed inputs is a configuration error.
pub fn map_lib_err(e: iqcert::Error) -> CliError {
    use iqcert::Error as E;
    match e {
        E::NoCertificate => CliError::NoCertificate(e.to_string()),
        E::NonFiniteIterate { .. }
        | E::SolverFailure(_)
        | E::MaxIterationsExceeded { .. }
        | E::InsufficientData(_)
        | E::InnerSolverDiverged
        | E::NotPositiveDefinite(_)
        | E::SingularTransform(_)
        | E::UnverifiedCertificate(_)
        | E::PointOutsideSet { .. } => CliError::Numeric(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "iqcert",
    about = "Certify convergence rates for first-order methods and their projected variants",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Override the relevant tolerance (bisection for certify, stopping for simulate)
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory (overrides [output] dir; default "out")
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on simulation iterations
    #[arg(long)]
    max_iters: Option<usize>,
}

impl CommonArgs {
    fn into_opts(self) -> CommonOpts {
        CommonOpts {
            config: self.config,
            seed: self.seed,
            tol: self.tol,
            out: self.out,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for a rate certificate for the configured algorithm
    Certify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the configured algorithm and write the trajectory as CSV
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recompute the reference-example quantities and report a pass/fail table
    ReproducePaper {
        /// Tolerance for the tabulated comparisons (default 1e-4; 1e-3 for the constrained optimum)
        #[arg(long)]
        tol: Option<f64>,
        /// Directory for the written report (stdout only when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Self-test: corrupt the quadratic's matrix so the sector row must fail
        #[arg(long)]
        corrupt_f: bool,
    },
    /// Run the randomized invariant suites for the projection inequalities
    PropertySuite {
        /// Base seed for the randomized cases
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cases per set type in each suite
        #[arg(long, default_value_t = 200)]
        counts: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Certify { common } => commands::cmd_certify(&common.into_opts()),
        Cmd::Simulate { common } => commands::cmd_simulate(&common.into_opts()),
        Cmd::ReproducePaper { tol, out, corrupt_f } => {
            commands::cmd_reproduce_paper(tol, out.as_deref(), corrupt_f)
        }
        Cmd::PropertySuite { seed, counts } => commands::cmd_property_suite(seed, counts),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    // clap's own usage errors would exit with status 2, which this tool
    // reserves for "no certificate found"; fold them into the config category.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            // --help / --version go to stdout and exit 0.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
