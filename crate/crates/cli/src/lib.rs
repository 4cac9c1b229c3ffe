//! `crn`: inspect reaction networks, integrate them and audit the result.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 invalid network or run
//! configuration, 3 solver failure (partial output is still written), 4 the
//! trajectory failed the audit.

// `!(x > 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod check;
mod compare;
mod run;
mod style;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use check::cmd_check;
pub use compare::{cmd_compare, compare_rows, CompareRow};
pub use run::{cmd_simulate, load_network, Loaded, RunOutput};
pub use style::Style;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_AUDIT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "crn", version, about = "Mass-action reaction networks: check, simulate, compare")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the stoichiometry, rank, conservation laws and equilibrium of a network.
    Check {
        /// Network file (.crn).
        file: PathBuf,
        /// Rate constants for reactions without a `; kf=.., kr=..` clause.
        #[arg(long, value_name = "KF,KR", value_parser = parse_rate_pair)]
        default_rates: Option<(f64, f64)>,
    },
    /// Integrate a network and audit the trajectory.
    Simulate(SimulateArgs),
    /// Run several schemes on one network and tabulate their accuracy.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Trajectory,
    ExplicitEuler,
    ImplicitEuler,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Trajectory => "trajectory",
            Scheme::ExplicitEuler => "explicit-euler",
            Scheme::ImplicitEuler => "implicit-euler",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Settings shared by `simulate` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Network file (.crn) with `init` lines.
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub t_end: f64,
    /// Newton gradient tolerance for the trajectory scheme
    /// (default 1e-12 max(1, |affinity|)).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Use this detailed-balance equilibrium instead of computing one.
    #[arg(long, value_name = "V1,V2,...", value_parser = parse_vec)]
    pub c_inf: Option<Values>,
    /// Rate constants for reactions without a `; kf=.., kr=..` clause.
    #[arg(long, value_name = "KF,KR", value_parser = parse_rate_pair)]
    pub default_rates: Option<(f64, f64)>,
    #[arg(long, default_value_t = crn_core::scheme::DEFAULT_MAX_NEWTON)]
    pub max_newton: usize,
    /// Start each Newton solve from an explicit step when that helps.
    #[arg(long)]
    pub predictor: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = Scheme::Trajectory)]
    pub scheme: Scheme,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Audit threshold on any single-step increase of F.
    #[arg(long, default_value_t = 1e-10)]
    pub max_energy_increase: f64,
    /// Audit threshold on conservation drift, relative to |gamma| |c0|.
    #[arg(long, default_value_t = 1e-10)]
    pub max_conservation: f64,
    /// Do not print the audit summary to stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated list of at least two schemes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub schemes: Vec<Scheme>,
    /// Also run each scheme at dt/2, dt/4, ... (this many halvings) and
    /// report the observed order.
    #[arg(long, default_value_t = 0)]
    pub halvings: u32,
    /// Machine-readable CSV instead of an aligned table.
    #[arg(long)]
    pub csv: bool,
    /// Omit the wall-time column so output is reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

/// A comma-separated list of numbers given as one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

fn parse_vec(s: &str) -> Result<Values, String> {
    crn_core::io::parse_vector(s).map(Values)
}

fn parse_rate_pair(s: &str) -> Result<(f64, f64), String> {
    match crn_core::io::parse_vector(s)?.as_slice() {
        [kf, kr] => Ok((*kf, *kr)),
        _ => Err("expected two values KF,KR".into()),
    }
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Runs a parsed command line, writing results to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write, style: Style) -> u8 {
    let result = match cli.command {
        Command::Check { file, default_rates } => {
            cmd_check(&file, default_rates, style).and_then(|report| write_all(out, report.as_bytes()))
        }
        Command::Simulate(args) => cmd_simulate(&args, out, err, style),
        Command::Compare(args) => cmd_compare(&args, style).and_then(|text| write_all(out, text.as_bytes())),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}: {}", style.error("error"), e.message);
            e.code
        }
    }
}

pub(crate) fn write_all(out: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new(EXIT_USAGE, format!("cannot write output: {e}")))
}
