//! Command-line pipeline for the drive-by channel sounder.
//!
//! `plan` checks the sounder parameters, `simulate` writes the receive
//! record, `process` turns it into per-transmitter transfer functions and
//! `analyze` produces LSF, DSD and SBL products per evaluation window.

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, Result};
pub use pipeline::Options;

#[derive(Debug, Parser)]
#[command(name = "dds", version, about = "Drive-by delay-Doppler channel sounding pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the sounder parameters and write the report.
    Plan,
    /// Synthesize the standstill and drive-by records.
    Simulate,
    /// Estimate CFO and extract per-transmitter transfer functions.
    Process,
    /// LSF, DSD and SBL products per evaluation window.
    Analyze,
    /// All stages in order.
    RunAll,
}

#[derive(Debug, Args)]
pub struct Flags {
    /// Run config (TOML with [sounder], [capture], [lsf], [sbl], [export]).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Number of evaluation windows.
    #[arg(long, global = true)]
    pub windows: Option<usize>,
    #[arg(long, global = true)]
    pub sbl_iters: Option<usize>,
    /// Peaks kept per window (LSF list and SBL active set).
    #[arg(long = "peaks", global = true)]
    pub peaks: Option<usize>,
}

impl From<Flags> for Options {
    fn from(f: Flags) -> Self {
        Options {
            config: f.config,
            scenario: f.scenario,
            seed: f.seed,
            out_dir: f.out_dir,
            windows: f.windows,
            sbl_iters: f.sbl_iters,
            peaks: f.peaks,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let opts = Options::from(cli.flags);
    match cli.command {
        Command::Plan => {
            let report = pipeline::cmd_plan(&opts)?;
            print!("{report}");
            Ok(())
        }
        Command::Simulate => pipeline::cmd_simulate(&opts),
        Command::Process => pipeline::cmd_process(&opts),
        Command::Analyze => pipeline::cmd_analyze(&opts),
        Command::RunAll => pipeline::cmd_run_all(&opts),
    }
}
