//! Monte Carlo engine: drops, precodes, quantizes and measures per trial,
//! then aggregates over trials for every SNR point.

mod config;
mod sinr;
mod trial;

use rayon::prelude::*;

pub use config::{BitScheme, ExperimentConfig, FeedbackMode, Scheme};
pub use sinr::{instantaneous_sinr, SinrParts, Transmitter};
pub use trial::{draw_network, run_trial, trial_rng, TrialResult};

use crate::error::{Error, Result};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CRZF_WORKERS";

/// Per-trial averages kept for paired comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSummary {
    /// Mean SINR over the coordinated users (linear).
    pub mean_sinr: f64,
    /// Mean over cells of the cell sum rate.
    pub mean_se: f64,
    pub analytic_sinr: Option<f64>,
    /// Mean over cells of `Σ_l log₂(1 + E[SINR])`.
    pub analytic_se: Option<f64>,
}

impl TrialSummary {
    pub fn from_result(cfg: &ExperimentConfig, r: &TrialResult) -> Self {
        let (analytic_sinr, analytic_se) = match &r.analytic_sinr {
            Some(a) => {
                let mean = a.iter().sum::<f64>() / a.len() as f64;
                let se = a.iter().map(|s| (1.0 + s).log2()).sum::<f64>() / cfg.k as f64;
                (Some(mean), Some(se))
            }
            None => (None, None),
        };
        Self {
            mean_sinr: r.mean_sinr(),
            mean_se: r.mean_cell_rate(),
            analytic_sinr,
            analytic_se,
        }
    }
}

/// Aggregate over all trials at one SNR point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub rho0_db: f64,
    pub trials: usize,
    /// Linear mean SINR.
    pub mean_sinr: f64,
    pub mean_sinr_db: f64,
    /// Standard error of `mean_sinr`.
    pub sinr_stderr: f64,
    pub mean_se: f64,
    pub se_stderr: f64,
    pub analytic_sinr: Option<f64>,
    pub analytic_sinr_db: Option<f64>,
    pub analytic_se: Option<f64>,
    pub per_trial: Vec<TrialSummary>,
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl SweepPoint {
    fn aggregate(rho0_db: f64, per_trial: Vec<TrialSummary>) -> Self {
        let (mean_sinr, sinr_stderr) = mean_and_stderr(per_trial.iter().map(|t| t.mean_sinr));
        let (mean_se, se_stderr) = mean_and_stderr(per_trial.iter().map(|t| t.mean_se));
        let analytic = |f: fn(&TrialSummary) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = per_trial.iter().map(f).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        let analytic_sinr = analytic(|t| t.analytic_sinr);
        let analytic_se = analytic(|t| t.analytic_se);
        Self {
            rho0_db,
            trials: per_trial.len(),
            mean_sinr,
            mean_sinr_db: 10.0 * mean_sinr.log10(),
            sinr_stderr,
            mean_se,
            se_stderr,
            analytic_sinr,
            analytic_sinr_db: analytic_sinr.map(|s| 10.0 * s.log10()),
            analytic_se,
            per_trial,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

impl ExperimentResult {
    /// Mean SINR must not decrease as the cell-edge SNR grows.
    pub fn check_invariants(&self) -> Result<()> {
        let mut sorted: Vec<&SweepPoint> = self.points.iter().collect();
        sorted.sort_by(|a, b| a.rho0_db.total_cmp(&b.rho0_db));
        for pair in sorted.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let slack = 3.0 * (lo.sinr_stderr + hi.sinr_stderr);
            if hi.mean_sinr + slack < lo.mean_sinr {
                return Err(Error::Invariant(format!(
                    "mean SINR fell from {:.4} at {} dB to {:.4} at {} dB",
                    lo.mean_sinr, lo.rho0_db, hi.mean_sinr, hi.rho0_db
                )));
            }
        }
        Ok(())
    }
}

fn worker_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::config(WORKERS_ENV, format!("expected a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs the whole experiment using the worker count from `CRZF_WORKERS`,
/// or all cores.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_workers(cfg, None)
}

/// Results depend only on the configuration, not on `workers`.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let job = || -> Result<Vec<Vec<TrialSummary>>> {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                Ok(run_trial(cfg, &layout, t)?
                    .iter()
                    .map(|r| TrialSummary::from_result(cfg, r))
                    .collect())
            })
            .collect()
    };
    let per_trial = match worker_count(workers)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?
            .install(job)?,
        None => job()?,
    };
    let points = cfg
        .rho0_db
        .iter()
        .enumerate()
        .map(|(i, &rho)| SweepPoint::aggregate(rho, per_trial.iter().map(|t| t[i]).collect()))
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        points,
    })
}
