//! CSV tables and the provenance manifest.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use crzf_core::sim::{ExperimentConfig, ExperimentResult, SweepPoint};
use serde::Serialize;

use crate::study::StudyHeader;

/// Nine significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn bits_label(cfg: &ExperimentConfig) -> String {
    if cfg.uses_bits() {
        cfg.bits.label()
    } else {
        "none".to_string()
    }
}

pub const RESULTS_HEADER: [&str; 14] = [
    "series",
    "scheme",
    "feedback",
    "bits",
    "rho0_db",
    "trials",
    "seed",
    "mean_sinr",
    "mean_sinr_db",
    "stderr",
    "mean_se",
    "se_stderr",
    "analytic_sinr_db",
    "analytic_se",
];

pub const OVERLAY_HEADER: [&str; 10] = [
    "series",
    "bits",
    "rho0_db",
    "trials",
    "seed",
    "mean_sinr_db",
    "analytic_sinr_db",
    "gap_db",
    "mean_se",
    "analytic_se",
];

/// One finished series.
pub struct SeriesResult {
    pub name: String,
    pub result: ExperimentResult,
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn results_row(name: &str, cfg: &ExperimentConfig, p: &SweepPoint) -> Vec<String> {
    vec![
        name.to_string(),
        cfg.scheme.name().to_string(),
        cfg.feedback.name().to_string(),
        bits_label(cfg),
        fmt_float(p.rho0_db),
        p.trials.to_string(),
        cfg.seed.to_string(),
        fmt_float(p.mean_sinr),
        fmt_float(p.mean_sinr_db),
        fmt_float(p.sinr_stderr),
        fmt_float(p.mean_se),
        fmt_float(p.se_stderr),
        fmt_opt(p.analytic_sinr_db),
        fmt_opt(p.analytic_se),
    ]
}

pub fn write_results(path: &Path, results: &[SeriesResult]) -> Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .flat_map(|s| s.result.points.iter().map(move |p| results_row(&s.name, &s.result.config, p)))
        .collect();
    write_table(path, &RESULTS_HEADER, &rows)
}

/// Only series with the closed-form overlay enabled.
pub fn write_overlay(path: &Path, results: &[SeriesResult]) -> Result<()> {
    let mut rows = Vec::new();
    for s in results.iter().filter(|s| s.result.config.overlay) {
        let cfg = &s.result.config;
        for p in &s.result.points {
            let gap = p.analytic_sinr_db.map(|a| a - p.mean_sinr_db);
            rows.push(vec![
                s.name.clone(),
                bits_label(cfg),
                fmt_float(p.rho0_db),
                p.trials.to_string(),
                cfg.seed.to_string(),
                fmt_float(p.mean_sinr_db),
                fmt_opt(p.analytic_sinr_db),
                fmt_opt(gap),
                fmt_float(p.mean_se),
                fmt_opt(p.analytic_se),
            ]);
        }
    }
    write_table(path, &OVERLAY_HEADER, &rows)
}

/// Mean cell-edge SE with one row per series and one column per SNR point.
pub fn write_se_grid(path: &Path, results: &[SeriesResult]) -> Result<()> {
    let mut rhos: Vec<f64> = Vec::new();
    for s in results {
        for p in &s.result.points {
            if !rhos.iter().any(|r| r.to_bits() == p.rho0_db.to_bits()) {
                rhos.push(p.rho0_db);
            }
        }
    }
    rhos.sort_by(f64::total_cmp);
    let mut header: Vec<String> = vec!["series".into(), "trials".into(), "seed".into()];
    header.extend(rhos.iter().map(|r| format!("se_at_{r}dB")));
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|s| {
            let cfg = &s.result.config;
            let mut row = vec![s.name.clone(), cfg.trials.to_string(), cfg.seed.to_string()];
            row.extend(rhos.iter().map(|r| {
                s.result
                    .points
                    .iter()
                    .find(|p| p.rho0_db.to_bits() == r.to_bits())
                    .map(|p| fmt_float(p.mean_se))
                    .unwrap_or_default()
            }));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, &rows)
}

#[derive(Serialize)]
struct ManifestSeries<'a> {
    name: &'a str,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct Manifest<'a> {
    source: &'a str,
    output_dir: String,
    version: &'static str,
    study: &'a StudyHeader,
    series: Vec<ManifestSeries<'a>>,
}

/// Everything needed to rerun the study and get the same tables.
pub fn write_manifest(path: &Path, source: &str, out_dir: &Path, header: &StudyHeader, results: &[SeriesResult]) -> Result<()> {
    let manifest = Manifest {
        source,
        output_dir: out_dir.display().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        study: header,
        series: results
            .iter()
            .map(|s| ManifestSeries {
                name: &s.name,
                config: &s.result.config,
            })
            .collect(),
    };
    std::fs::write(path, toml::to_string(&manifest)?).with_context(|| format!("writing {}", path.display()))
}

/// Names of the files `write_all` produces for these results.
pub fn output_files(results: &[SeriesResult]) -> BTreeSet<&'static str> {
    let mut files = BTreeSet::from(["results.csv", "se_grid.csv", "manifest.toml"]);
    if results.iter().any(|s| s.result.config.overlay) {
        files.insert("overlay.csv");
    }
    files
}

pub fn write_all(out_dir: &Path, source: &str, header: &StudyHeader, results: &[SeriesResult]) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_results(&out_dir.join("results.csv"), results)?;
    if results.iter().any(|s| s.result.config.overlay) {
        write_overlay(&out_dir.join("overlay.csv"), results)?;
    }
    write_se_grid(&out_dir.join("se_grid.csv"), results)?;
    write_manifest(&out_dir.join("manifest.toml"), source, out_dir, header, results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(12.3456789012), "1.23456789e1");
        assert_eq!(fmt_float(-0.5), "-5.00000000e-1");
    }
}
