//! `relent`: command-line front end for the relative-entropy second-law
//! toolkit.
//!
//! Every subcommand reads flags (and usually a strict-schema JSON config),
//! runs deterministically from the configured seed, and emits CSV or JSON.
//! Exit codes form the verdict contract:
//!
//! - 0: all checks passed
//! - 1: usage, config, or precondition error
//! - 2: an inequality or identity violated beyond tolerance (a
//!   machine-readable report goes to stderr)

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use output::Format;

/// A command's terminal outcome, mapped onto the exit-code contract.
pub enum Failure {
    /// Bad flags, malformed config, or a violated precondition.
    Config(String),
    /// A quantitative check failed; carries a JSON report of the failures.
    Violation {
        summary: String,
        report: serde_json::Value,
    },
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }
}

impl From<relent_core::Error> for Failure {
    fn from(e: relent_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "relent",
    version,
    about = "Relative-entropy ledgers, lightcone runs, and entropy-current checks",
    after_help = "Exit codes: 0 = all checks pass, 1 = usage/config/precondition error, \
                  2 = violation beyond tolerance."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the three-outcome probability simplex and tabulate relative
    /// entropy to the uniform distribution.
    Contours {
        /// Points per simplex edge (at least 2).
        #[arg(long)]
        resolution: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Audit channel steps against a fixed reference ensemble and emit
    /// entropy-balance ledgers.
    Secondlaw {
        /// JSON config: seed, ensemble, channel, cases, optional tolerance.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate a local disturbance through a brickwork diamond of
    /// number-conserving gates and edge baths, tracing relative entropy.
    Lightcone {
        /// JSON config: seed, chain, schedule, rho0, lambdas.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate entropy currents, divergences, Killing residuals, and
    /// diamond balance on a flat spacetime grid.
    Geometry {
        /// Named field preset; see --list for the catalog.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Field grid as a JSON file instead of a preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// List available presets and exit.
        #[arg(long, default_value_t = false)]
        list: bool,
        /// Number of grid-halving refinement levels beyond the base grid.
        #[arg(long, default_value_t = 0)]
        refine: u32,
        /// Base grid points along t (preset mode).
        #[arg(long, default_value_t = 21)]
        nt: usize,
        /// Base grid points along x (preset mode).
        #[arg(long, default_value_t = 21)]
        nx: usize,
        /// Base grid spacing along t (preset mode).
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Base grid spacing along x (preset mode).
        #[arg(long, default_value_t = 0.05)]
        dx: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Contours {
            resolution,
            out,
            format,
        } => commands::contours::run(resolution, out.as_deref(), format),
        Command::Secondlaw { config, out } => {
            commands::secondlaw::run(&config, out.as_deref())
        }
        Command::Lightcone { config, out } => {
            commands::lightcone::run(&config, out.as_deref())
        }
        Command::Geometry {
            preset,
            config,
            list,
            refine,
            nt,
            nx,
            dt,
            dx,
            out,
            format,
        } => commands::geometry::run(commands::geometry::Args {
            preset,
            config,
            list,
            refine,
            base: relent_core::geometry::GridParams { nt, nx, dt, dx },
            out,
            format,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violation { summary, report }) => {
            eprintln!("violation: {summary}");
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
