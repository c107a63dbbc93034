//! Command-line driver: parses flags and config files, runs a study, and
//! writes CSV tables plus a `manifest.json` into the output directory.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod output;
pub mod params;

pub use params::Params;

#[derive(Debug, Parser)]
#[command(
    name = "glassotto",
    version,
    about = "Quantum Otto cycles on a disordered Ising chain"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Disorder-averaged critical field per chain length.
    CriticalField(Params),
    /// Cycle regime over a (t_c, h_i) grid at fixed t_h.
    RegimeMap(Params),
    /// Work and performance per spin along h_i.
    Sweep(Params),
    /// Peak heights versus chain length over a range of t_h.
    Scaling(Params),
    /// Re-analyze the peaks of an existing sweep.csv.
    Peaks(Params),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] glassotto::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use glassotto::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::InvalidSize(_)
                | E::InvalidField(_)
                | E::InvalidTemperature(_)
                | E::InvalidParameter(_)
                | E::Unsorted(_)
                | E::Underdetermined(_) => 2,
                _ => 3,
            },
        }
    }
}

/// Runs the command and returns the path of the written manifest.
pub fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let (name, params) = match cli.command {
        Command::CriticalField(p) => ("critical-field", p),
        Command::RegimeMap(p) => ("regime-map", p),
        Command::Sweep(p) => ("sweep", p),
        Command::Scaling(p) => ("scaling", p),
        Command::Peaks(p) => ("peaks", p),
    };
    let mut params = params.resolve()?;
    let threads = *params.threads.get_or_insert(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    log::debug!("{name} on {} threads", pool.current_num_threads());
    pool.install(|| match name {
        "critical-field" => commands::critical_field(params),
        "regime-map" => commands::regime(params),
        "sweep" => commands::sweep(params),
        "scaling" => commands::scaling(params),
        _ => commands::peaks(params),
    })
}
