//! Command-line surface of `resonant-core`: JSON run configs, subcommand
//! dispatch and result files (JSON documents, trajectory CSV).
//!
//! Exit codes: 0 success, 1 numerical failure, 2 config or parse error,
//! 3 I/O error, 4 strict-mode convergence failure.

pub mod commands;
pub mod config;
mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Block, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "resonant", version, about = "Resonant control of a qubit-resonator ladder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Pulse duration (ns).
    #[arg(long = "T", global = true)]
    pub duration: Option<f64>,
    /// Target level.
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Fourier components per tone.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Result file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Trajectory CSV.
    #[arg(long, global = true)]
    pub trajectory: Option<PathBuf>,
    /// Fail with exit code 4 when the truncation is not converged.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Continue an interrupted optimization from its checkpoint.
    #[arg(long, global = true)]
    pub resume: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Dressed energies and transition frequencies.
    Spectrum,
    /// Single-step |0⟩ → |N,−⟩ preparation.
    FockPrep {
        /// Optimized pulse replacing the analytic one.
        #[arg(long)]
        pulse: Option<PathBuf>,
    },
    /// Search carriers and Fourier envelopes for |0⟩ → |N,−⟩.
    Optimize,
    /// Simulate a stored pulse and report 1 − F.
    Replay {
        pulse_file: Option<PathBuf>,
        /// Row of a table file.
        #[arg(long)]
        row: Option<usize>,
    },
    /// Compile and simulate a qudit rotation.
    Qudit,
    /// Two-resonator NOON-state synthesis.
    Noon,
    /// Simulate a stored protocol plan.
    Simulate { plan_file: Option<PathBuf> },
}

impl Command {
    fn block(&self) -> Block {
        match self {
            Command::Spectrum => Block::Spectrum,
            Command::FockPrep { .. } => Block::Fock,
            Command::Optimize => Block::Optimize,
            Command::Replay { .. } => Block::Replay,
            Command::Qudit => Block::Qudit,
            Command::Noon => Block::Noon,
            Command::Simulate { .. } => Block::Simulate,
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.activate(cli.command.block())?;
    if cli.out.is_some() {
        config.out.clone_from(&cli.out);
    }
    if cli.trajectory.is_some() {
        config.trajectory.clone_from(&cli.trajectory);
    }
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    let unused = |flag: &str| CliError::Config(format!("{flag} does not apply to this command"));
    match &cli.command {
        Command::Spectrum => {
            if cli.n.is_some() || cli.m.is_some() || cli.duration.is_some() {
                return Err(unused("--N/--M/--T"));
            }
        }
        Command::FockPrep { pulse } => {
            let block = config.fock.get_or_insert_with(Default::default);
            if let Some(n) = cli.n {
                block.n = n;
            }
            if pulse.is_some() {
                block.pulse_file.clone_from(pulse);
            }
            if cli.m.is_some() || cli.duration.is_some() {
                return Err(unused("--M/--T"));
            }
        }
        Command::Optimize => {
            let block = config.optimize.get_or_insert_with(Default::default);
            if let Some(n) = cli.n {
                block.n = n;
            }
            if let Some(t) = cli.duration {
                block.duration = t;
            }
            if let Some(m) = cli.m {
                block.m = m;
            }
        }
        Command::Replay { pulse_file, row } => {
            let block = config.replay.get_or_insert_with(Default::default);
            if pulse_file.is_some() {
                block.pulse_file.clone_from(pulse_file);
            }
            if row.is_some() {
                block.row = *row;
            }
            if cli.n.is_some() {
                block.n = cli.n;
            }
            if cli.m.is_some() {
                return Err(unused("--M"));
            }
        }
        Command::Qudit => {
            let block = config.qudit.get_or_insert_with(Default::default);
            if cli.duration.is_some() || cli.m.is_some() {
                let opt = block.optimize.get_or_insert_with(Default::default);
                if let Some(t) = cli.duration {
                    opt.duration = t;
                }
                if let Some(m) = cli.m {
                    opt.m = m;
                }
            }
            if cli.n.is_some() {
                return Err(unused("--N"));
            }
        }
        Command::Noon => {
            let block = config.noon.get_or_insert_with(Default::default);
            if let Some(n) = cli.n {
                block.n = n;
            }
            if cli.m.is_some() || cli.duration.is_some() {
                return Err(unused("--M/--T"));
            }
        }
        Command::Simulate { plan_file } => {
            let block = config.simulate.get_or_insert_with(Default::default);
            if plan_file.is_some() {
                block.plan_file.clone_from(plan_file);
            }
            if cli.n.is_some() || cli.m.is_some() || cli.duration.is_some() {
                return Err(unused("--N/--M/--T"));
            }
        }
    }
    Ok(config)
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Spectrum => commands::spectrum(&config).map(drop),
        Command::FockPrep { .. } => commands::fock_prep(&config).map(drop),
        Command::Optimize => commands::optimize(&config, cli.strict, cli.resume).map(drop),
        Command::Replay { .. } => commands::replay(&config, cli.duration).map(drop),
        Command::Qudit => commands::qudit(&config).map(drop),
        Command::Noon => commands::noon(&config).map(drop),
        Command::Simulate { .. } => commands::simulate(&config).map(drop),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
