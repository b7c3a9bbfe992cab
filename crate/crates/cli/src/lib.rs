//! The `boin` command line: protocol boundary tables, single decisions, MTD
//! selection, random scenarios and simulation campaigns.
//!
//! Every command writes to a caller-supplied sink so that output is a pure
//! function of the arguments.

mod args;
mod commands;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use args::{parse_counts, Family, Format, GeneratorArgs, SpecArgs};

/// Environment variable that sets the simulation worker count.
pub const WORKERS_ENV: &str = "BOIN_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "boin", version, about = "Optimal interval designs for phase I dose finding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Escalation, deescalation and elimination cutoffs by sample size.
    Boundaries {
        #[arg(long, value_enum, default_value = "local")]
        design: Family,
        #[command(flatten)]
        spec: SpecArgs,
        /// Largest sample size in the table [default: --max-sample].
        #[arg(long)]
        n_max: Option<u32>,
        /// Dose whose priors apply (one-based).
        #[arg(long, default_value_t = 1)]
        dose: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, short, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Decision for the next cohort from cumulative counts.
    NextDose {
        /// Registered design name; `local` and `global` are accepted.
        #[arg(long, default_value = "local-optimal")]
        design: String,
        /// Design config as inline JSON.
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        spec: SpecArgs,
        /// Per-dose `patients/toxicities` from dose 1, e.g. `3/0,6/1`.
        #[arg(long)]
        counts: String,
        /// Current dose (one-based).
        #[arg(long)]
        current: usize,
        /// Most recent cohort at the current dose as `size/toxicities`.
        #[arg(long)]
        last_cohort: Option<String>,
        /// Lowest dose already closed by the elimination rule (one-based).
        #[arg(long)]
        eliminated_from: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Isotonic MTD selection from cumulative counts.
    SelectMtd {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        counts: String,
        #[arg(long)]
        eliminated_from: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Random dose-toxicity scenarios.
    Scenarios {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = 6)]
        doses: usize,
        #[arg(long)]
        phi: f64,
        #[command(flatten)]
        generator: GeneratorArgs,
        /// Calibrate a shared mu to this average gap first.
        #[arg(long)]
        target_gap: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        calibration_samples: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, short, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Fit the generator's shared mu to a target average gap.
    Calibrate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        target_gap: f64,
        #[arg(long, default_value_t = 6)]
        doses: usize,
        #[arg(long)]
        phi: f64,
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Operating characteristics of designs over replicated trials.
    Simulate(commands::SimulateArgs),
}

/// Failure of a command, with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid input: bad flags, parameters or trial state.
    Invalid(boin_core::Error),
    /// A numerical routine failed.
    Numerical(boin_core::Error),
    /// Reading or writing a file failed.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(e) | CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<boin_core::Error> for CliError {
    fn from(e: boin_core::Error) -> Self {
        match e {
            boin_core::Error::Numerical(_) => CliError::Numerical(e),
            _ => CliError::Invalid(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Runs a parsed command, writing its primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    commands::dispatch(cli.command, out, std::env::var(WORKERS_ENV).ok().as_deref())
}

/// Parses `args` (without the program name) and runs the command; the
/// worker count comes from `workers` instead of the environment.
pub fn run_args<I, S>(args: I, workers: Option<&str>, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(std::iter::once("boin".into()).chain(args.into_iter().map(Into::into)))
        .map_err(|e| CliError::Invalid(boin_core::Error::parameter("arguments", e.to_string())))?;
    commands::dispatch(cli.command, out, workers)
}
