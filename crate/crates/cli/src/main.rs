use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use crzf_cli::{load_study, oracle_report, presets, run_to_dir};

#[derive(Debug, Parser)]
#[command(name = "crzf", version, about = "Coordinated RZF precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a study file or preset and write CSV tables
    Run {
        /// Study file, or one of the preset names
        config: String,
        /// Output directory
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Override the trial count of every series
        #[arg(long)]
        trials: Option<usize>,
        /// Override the seed of every series
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: CRZF_WORKERS, else all cores)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and check a study file without running it
    Validate {
        config: String,
        /// Print every resolved series config
        #[arg(long)]
        echo: bool,
    },
    /// Compare closed-form eigenvalue expectations with sampling and quadrature
    Oracle {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
        m: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10")]
        alpha: Vec<f64>,
    },
    /// List the shipped presets
    Presets,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            workers,
        } => {
            let mut study = load_study(&config)?;
            if let Some(t) = trials {
                study = study.with_trials(t);
            }
            if let Some(s) = seed {
                study = study.with_seed(s);
            }
            for s in &study.series {
                s.config.validate()?;
            }
            let results = run_to_dir(&config, &study, &out, workers)?;
            for s in &results {
                for p in &s.result.points {
                    println!(
                        "{:<24} rho0 {:>6.1} dB  SINR {:>8.3} dB  SE {:>7.3} ± {:.3}",
                        s.name, p.rho0_db, p.mean_sinr_db, p.mean_se, p.se_stderr
                    );
                }
            }
            println!("wrote {}", out.display());
        }
        Command::Validate { config, echo } => {
            let study = load_study(&config)?;
            println!("{}: {} series OK", study.header.name, study.series.len());
            for s in &study.series {
                println!(
                    "  {:<24} {} / {} / {} points x {} trials",
                    s.name,
                    s.config.scheme.name(),
                    s.config.feedback.name(),
                    s.config.rho0_db.len(),
                    s.config.trials
                );
                if echo {
                    println!("{}", crzf_cli::study::config_to_toml(&s.config)?);
                }
            }
        }
        Command::Oracle { trials, seed, m, alpha } => {
            println!(
                "{:>2} {:>8} {:>3} {:>16} {:>16} {:>16} {:>10} {:>6}",
                "M", "alpha", "", "closed", "quadrature", "sampled", "stderr", "z"
            );
            for r in oracle_report(&m, &alpha, trials, seed)? {
                println!(
                    "{:>2} {:>8} {:>3} {:>16.9e} {:>16.9e} {:>16.9e} {:>10.2e} {:>6.2}",
                    r.m,
                    r.alpha,
                    r.quantity,
                    r.closed,
                    r.quadrature,
                    r.sampled.mean,
                    r.sampled.stderr,
                    r.z_score()
                );
            }
        }
        Command::Presets => {
            for name in presets::NAMES {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
