//! Binary entry point: subcommand dispatch over a shared JSON config,
//! with flags overriding individual config fields. Exit codes: 0 success,
//! 2 I/O or config failure, 3 partial scenario failure, 4 bad reference.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ilr_approx::cli::{self, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "ilr-approx",
    version,
    about = "Normal approximations to ilr-transformed count compositions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the analytic excess-variability table as CSV.
    Table3 {
        /// JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario grid; write summaries, comparisons, and a manifest.
    Simulate {
        /// JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Draws per scenario override.
        #[arg(long)]
        draws: Option<usize>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread count override; zero means one per CPU.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Write theoretical-vs-sample quantile pairs for one coordinate.
    Qq {
        /// JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scenario label, as listed in the manifest.
        #[arg(long)]
        scenario: String,
        /// One-based ilr coordinate.
        #[arg(long)]
        coord: usize,
    },
    /// Render SVG figures for the grid.
    Figures {
        /// JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &PathBuf, out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Table3 { config, out } => {
            let cfg = load(&config, out)?;
            let path = cli::cmd_table3(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Simulate { config, out, draws, seed, parallel } => {
            let mut cfg = load(&config, out)?;
            if let Some(n) = draws {
                cfg.n_draws = n;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(p) = parallel {
                cfg.parallelism = p;
            }
            cfg.validate()?;
            let outcome = cli::cmd_simulate(&cfg)?;
            println!(
                "wrote {} scenario summaries to {}",
                outcome.reports.len(),
                cfg.output_dir.display()
            );
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("scenario {} failed: {}", f.label, f.error);
                }
                return Err(CliError::PartialFailure {
                    failed: outcome.failures.len(),
                    total: outcome.reports.len() + outcome.failures.len(),
                });
            }
        }
        Command::Qq { config, out, scenario, coord } => {
            let cfg = load(&config, out)?;
            let path = cli::cmd_qq(&cfg, &scenario, coord)?;
            println!("wrote {}", path.display());
        }
        Command::Figures { config, out } => {
            let cfg = load(&config, out)?;
            let paths = cli::cmd_figures(&cfg)?;
            println!("wrote {} figures to {}", paths.len(), cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
