//! `autobid`: command-line access to markets, reductions and chaos diagnostics.
//!
//! Exit status: 0 success, 2 invalid input, 3 numerical failure, 4 failed
//! verification. CSV goes to `--out` when given, otherwise to stdout with the
//! one-line summary moved to stderr.
//!
//! # Market files
//!
//! ```toml
//! [bidders]
//! count = 2
//!
//! [[items]]
//! values = [2.0, 1.0]      # one entry per bidder
//! reserve = 0.5            # optional, must be strictly beaten
//!
//! [[segments]]
//! owners = [0]
//! value = 1.0              # per unit of mass
//! support = [0.0, 3.0]     # reserve prices
//! density = { kind = "constant", c = 1.0 }
//! ```
//!
//! Densities: `constant {c}`, `negation {c}` (`c / (p - 1)`), `derived {h}`
//! and `tabulated {points}`.
//!
//! # Target files
//!
//! ```toml
//! dimension = 1
//! a = [[0.0]]
//! bounds = [[-1.0, 1.0]]
//! h = [{ kind = "sine", amp = 1.0, freq = 1.0 }]
//! # optional: lipschitz = 1.0, normalized = false
//! ```

mod commands;
mod discrete_cmds;
pub mod files;

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use autobid_core::{Error as CoreError, ErrorClass};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use files::{load_market, load_target, save_market, save_target, MarketFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// A check the user asked for came out negative.
#[derive(Debug)]
pub struct VerificationFailed(pub String);

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

#[derive(Debug, Parser)]
#[command(name = "autobid", version, about = "Autobidding dynamics, reductions and chaos diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the continuous autobidding flow of a market file.
    Simulate(commands::SimulateArgs),
    /// Iterate a discrete multiplier update.
    Discrete(discrete_cmds::DiscreteArgs),
    /// Compile a target system into a market and verify the simulation.
    Reduce(commands::ReduceArgs),
    /// Integrate Chua's circuit, its augmented form, or the compiled market.
    Chua(commands::ChuaArgs),
    /// Largest Lyapunov exponent by shadow-orbit renormalization.
    Lyapunov(commands::LyapunovArgs),
    /// Return map on the section x = 1.
    Poincare(commands::PoincareArgs),
    /// Edge-image test of the deformed horseshoe.
    Horseshoe(commands::HorseshoeArgs),
    /// Long-run values over a learning-rate grid.
    Bifurcate(discrete_cmds::BifurcateArgs),
    /// Cobweb segments of a one-dimensional map.
    Cobweb(discrete_cmds::CobwebArgs),
    /// Search for periodic points of a one-dimensional map.
    Periodic(discrete_cmds::PeriodicArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    Entropic,
    Euclidean,
    Truncated,
}

/// Exactly one utility model for the discrete commands.
#[derive(Debug, Clone, Args)]
#[group(id = "model", required = true, multiple = false)]
pub struct ModelArgs {
    /// Two bidders valuing [[v, 1], [1, v]], tracked symmetrically.
    #[arg(long)]
    pub v: Option<f64>,
    /// Two bidders valuing [[1, 1/k], [1/k, 1]].
    #[arg(long)]
    pub ricker_k: Option<f64>,
    /// One bidder on a unit-density segment of reserves [0, cap].
    #[arg(long)]
    pub logistic_cap: Option<f64>,
    /// A market file.
    #[arg(long)]
    pub market: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Simulate(a) => commands::simulate(a),
        Command::Discrete(a) => discrete_cmds::discrete(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Chua(a) => commands::chua(a),
        Command::Lyapunov(a) => commands::lyapunov(a),
        Command::Poincare(a) => commands::poincare(a),
        Command::Horseshoe(a) => commands::horseshoe(a),
        Command::Bifurcate(a) => discrete_cmds::bifurcate(a),
        Command::Cobweb(a) => discrete_cmds::cobweb(a),
        Command::Periodic(a) => discrete_cmds::periodic(a),
    }
}

/// Maps an error chain onto the exit-status contract.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CoreError>() {
            return match c.class() {
                ErrorClass::InvalidInput => EXIT_INVALID,
                ErrorClass::Numerical => EXIT_NUMERICAL,
                ErrorClass::Verification => EXIT_VERIFICATION,
            };
        }
        if cause.is::<VerificationFailed>() {
            return EXIT_VERIFICATION;
        }
    }
    EXIT_INVALID
}

/// Sends CSV to `out` (summary to stdout) or to stdout (summary to stderr).
pub(crate) fn emit<F>(out: Option<&Path>, summary: &str, write: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| anyhow::anyhow!("creating {}: {e}", p.display()))?);
            write(&mut w)?;
            w.flush()?;
            println!("{summary}");
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush()?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub(crate) fn write_to(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))
}
