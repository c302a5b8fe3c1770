//! Experiment harness: subcommands that sweep the tube-cover toolkit over a
//! configured ladder and write CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Frenet,
    PartitionCheck,
    EtaNorms,
    ThresholdTable,
    Ack,
}

/// Validates the configuration and runs one subcommand on a pool of
/// `cfg.threads()` workers. Returns whether every flagged row passed.
pub fn run(command: Command, cfg: &RunConfig) -> CliResult<bool> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads())
        .build()
        .map_err(|e| CliError::usage("threads", e.to_string()))?;
    pool.install(|| match command {
        Command::Frenet => commands::frenet(cfg),
        Command::PartitionCheck => commands::partition_check(cfg),
        Command::EtaNorms => commands::eta_norms(cfg),
        Command::ThresholdTable => commands::threshold_table(cfg),
        Command::Ack => commands::ack(cfg),
    })
}
