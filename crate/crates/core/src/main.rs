use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oldroyd_core::io::{self, RunConfig, RunOutcome};
use oldroyd_core::Result;

#[derive(Parser)]
#[command(
    name = "oldroyd",
    version,
    about = "Damped Oldroyd flow on a periodic box"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial data and write the diagnostic series.
    Run {
        /// TOML configuration; defaults apply when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from this checkpoint instead of the initial data.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Radial quadrature sweep of the linear energy and low-frequency shells.
    Oracle {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Power-law exponent of one CSV column.
    Fit {
        csv: PathBuf,
        /// Column name, or `l2_sum` for the total L² energy.
        #[arg(long, default_value = io::L2_SUM)]
        column: String,
        #[arg(long, requires = "t_hi")]
        t_lo: Option<f64>,
        #[arg(long, requires = "t_lo")]
        t_hi: Option<f64>,
        /// Use the validity window of this configuration when no explicit
        /// window is given.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Verify the structural invariants of a checkpoint.
    Check {
        checkpoint: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => io::parse_config(&std::fs::read_to_string(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            config,
            csv,
            checkpoint,
            seed,
            resume,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(csv) = csv {
                cfg.outputs.csv = csv;
            }
            if let Some(path) = checkpoint {
                cfg.outputs.checkpoint = Some(path);
            }
            if let Some(seed) = seed {
                cfg.initial.seed = seed;
            }
            match io::cmd_run(&cfg, resume.as_deref())? {
                RunOutcome::Completed { records, .. } => {
                    println!(
                        "wrote {} samples to {}",
                        records.len(),
                        cfg.outputs.csv.display()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                RunOutcome::BlowUp {
                    time, field, step, ..
                } => {
                    eprintln!("blow-up: {field} became non-finite at t = {time} (step {step})");
                    Ok(ExitCode::from(io::EXIT_BLOWUP as u8))
                }
            }
        }
        Command::Oracle { config, csv } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(csv) = csv {
                cfg.oracle.csv = csv;
            }
            let report = io::cmd_oracle(&cfg)?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit {
            csv,
            column,
            t_lo,
            t_hi,
            config,
        } => {
            let window = match (t_lo, t_hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => io::config_window(&load(config.as_ref())?)?,
            };
            let fit = io::cmd_fit(&csv, &column, window)?;
            io::commands::print_fit(&mut std::io::stdout(), &column, &fit)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { checkpoint, config } => {
            let cfg = load(config.as_ref())?;
            let report = io::cmd_check(&checkpoint, &cfg.check)?;
            print!("{report}");
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(io::EXIT_CHECK_FAILED as u8))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
