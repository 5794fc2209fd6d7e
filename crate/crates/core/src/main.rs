//! Command-line front end. Exit code 0 on success, 1 for bad usage or an
//! invalid config, 2 when a run itself fails.

use chsmc::config::{parse_config, Experiment, RunConfig};
use chsmc::error::SimError;
use chsmc::experiments::dispatch;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "chsmc",
    version,
    about = "Conserved phase-field solver with feedback control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the coupled system and record diagnostics.
    Run {
        /// Config file of key = value lines.
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop run driving a·theta + b·phi toward the target profile.
    Smc {
        #[arg(long)]
        config: PathBuf,
        /// Feedback gain override.
        #[arg(long)]
        rho: Option<f64>,
        /// Sweep a grid of gains instead of running a single one.
        #[arg(long)]
        rho_sweep: bool,
        /// Absolute reaching tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two lockstep runs measuring sensitivity to perturbed data.
    Contdep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement study over the graph approximation level.
    EpsStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in property battery; a config is optional.
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(SimError),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Runtime(e)
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Usage(e.to_string()))
}

fn revalidate(cfg: &RunConfig) -> Result<(), Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))
}

fn run_cli(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = load(&config)?;
            cfg.experiment = Experiment::Simulate;
            if let Some(out) = out {
                cfg.out = out;
            }
            revalidate(&cfg)?;
            dispatch(&cfg)?;
        }
        Command::Smc {
            config,
            rho,
            rho_sweep,
            tol,
            out,
        } => {
            let mut cfg = load(&config)?;
            cfg.experiment = if rho_sweep || cfg.experiment == Experiment::SmcSweep {
                Experiment::SmcSweep
            } else {
                Experiment::Smc
            };
            if let Some(rho) = rho {
                cfg.rho = rho;
            }
            if let Some(tol) = tol {
                cfg.tol_abs = Some(tol);
            }
            if let Some(out) = out {
                cfg.out = out;
            }
            revalidate(&cfg)?;
            dispatch(&cfg)?;
        }
        Command::Contdep { config, out } => {
            let mut cfg = load(&config)?;
            cfg.experiment = Experiment::ContDep;
            if let Some(out) = out {
                cfg.out = out;
            }
            revalidate(&cfg)?;
            dispatch(&cfg)?;
        }
        Command::EpsStudy { config, out } => {
            let mut cfg = load(&config)?;
            cfg.experiment = Experiment::EpsStudy;
            if let Some(out) = out {
                cfg.out = out;
            }
            revalidate(&cfg)?;
            dispatch(&cfg)?;
        }
        Command::Selftest { config } => {
            let mut cfg = match config {
                Some(path) => load(&path)?,
                None => RunConfig::default(),
            };
            cfg.experiment = Experiment::SelfTest;
            dispatch(&cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let usage_ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
