use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moment_tubes_cli::{run, CliError, Command, RunConfig};

/// Numerical experiments on anisotropic tube covers of the moment curve.
///
/// Exit status: 0 when every flagged row passes, 1 when a run completed with
/// failing rows, 2 for usage/configuration errors, 3 when a computation failed.
#[derive(Debug, Parser)]
#[command(name = "mtubes", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML run configuration (defaults apply to missing fields).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Curve dimension.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// The subcommand's main budget: frenet points, partition samples, L^p'
    /// samples per scale (eta-norms) or samples per shell (ack).
    #[arg(long, global = true)]
    budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Frenet frames and orthonormality residuals on a parameter grid.
    Frenet,
    /// C0 calibration and partition-of-unity checks per scale.
    PartitionCheck,
    /// L2, summed L1 and L^p' norms over the ladder, with power-law fits.
    EtaNorms,
    /// Critical exponents and vanishing certificates from stored measurements.
    ThresholdTable,
    /// Dyadic shell masses of the extension integral and slope verdicts.
    Ack,
}

fn configure(cli: &Cli) -> Result<(Command, RunConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    let command = match cli.command {
        Sub::Frenet => Command::Frenet,
        Sub::PartitionCheck => Command::PartitionCheck,
        Sub::EtaNorms => Command::EtaNorms,
        Sub::ThresholdTable => Command::ThresholdTable,
        Sub::Ack => Command::Ack,
    };
    if let Some(b) = cli.budget {
        match command {
            Command::Frenet => cfg.budget.frenet_points = b,
            Command::PartitionCheck => cfg.budget.partition_samples = b,
            Command::EtaNorms => cfg.budget.lp_samples = b,
            Command::Ack => cfg.budget.shell_samples = b,
            Command::ThresholdTable => {}
        }
    }
    Ok((command, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure(&cli).and_then(|(command, cfg)| run(command, &cfg).map(|ok| (ok, cfg)));
    match outcome {
        Ok((true, cfg)) => {
            println!("all checks passed; results in {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Ok((false, cfg)) => {
            eprintln!("some checks failed; see {}", cfg.out.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
