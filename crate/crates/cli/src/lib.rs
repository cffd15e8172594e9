//! Study orchestration behind the `crzf` binary.

pub mod output;
pub mod presets;
pub mod study;

use std::path::Path;

use anyhow::{bail, Result};
use crzf_core::analytics::WishartMoments;
use crzf_core::oracle::{eigen_oracle_grid, quadrature_moments, Estimate};
use crzf_core::sim::run_experiment_with_workers;

pub use output::SeriesResult;
pub use study::{load_study, parse_config, parse_study, Series, Study, StudyHeader};

/// Runs every series in order. Trial-level self-check failures abort the
/// run; sweep-level ones are collected so the tables still get written.
pub fn run_study(study: &Study, workers: Option<usize>) -> Result<(Vec<SeriesResult>, Vec<String>)> {
    let mut results = Vec::with_capacity(study.series.len());
    let mut failures = Vec::new();
    for s in &study.series {
        let result = run_experiment_with_workers(&s.config, workers)
            .map_err(|e| anyhow::anyhow!("series `{}`: {e}", s.name))?;
        if let Err(e) = result.check_invariants() {
            failures.push(format!("series `{}`: {e}", s.name));
        }
        results.push(SeriesResult {
            name: s.name.clone(),
            result,
        });
    }
    Ok((results, failures))
}

/// Runs a study and writes its tables to `out_dir`. Fails after writing
/// when any self-check failed.
pub fn run_to_dir(source: &str, study: &Study, out_dir: &Path, workers: Option<usize>) -> Result<Vec<SeriesResult>> {
    let (results, failures) = run_study(study, workers)?;
    output::write_all(out_dir, source, &study.header, &results)?;
    if !failures.is_empty() {
        bail!("self-check failed:\n  {}", failures.join("\n  "));
    }
    Ok(results)
}

/// Closed form, quadrature and sampled value of one eigenvalue expectation.
#[derive(Clone, Copy, Debug)]
pub struct OracleRow {
    pub m: usize,
    pub alpha: f64,
    pub quantity: &'static str,
    pub closed: f64,
    pub quadrature: f64,
    pub sampled: Estimate,
}

impl OracleRow {
    pub fn z_score(&self) -> f64 {
        self.sampled.z_score(self.closed)
    }
}

/// Compares the closed-form `D(1)`, `D(2)` and `F` with eigenvalue sampling
/// and quadrature on an `(M, α)` grid.
pub fn oracle_report(ms: &[usize], alphas: &[f64], trials: usize, seed: u64) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    for &m in ms {
        let sampled = eigen_oracle_grid(m, alphas, trials, seed.wrapping_add(m as u64))?;
        for (&alpha, est) in alphas.iter().zip(&sampled) {
            let closed = WishartMoments::evaluate(m, alpha)?;
            let quad = quadrature_moments(m, alpha)?;
            for (quantity, c, q, s) in [
                ("D1", closed.d1, quad.d1, est.d1),
                ("D2", closed.d2, quad.d2, est.d2),
                ("F", closed.f, quad.f, est.f),
            ] {
                rows.push(OracleRow {
                    m,
                    alpha,
                    quantity,
                    closed: c,
                    quadrature: q,
                    sampled: s,
                });
            }
        }
    }
    Ok(rows)
}
