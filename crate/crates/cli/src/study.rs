//! Study files: a `[study]` header, shared experiment keys at the top level
//! and optional `[[series]]` tables that override them per curve.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use crzf_core::sim::ExperimentConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::presets;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyHeader {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Study {
    pub header: StudyHeader,
    pub series: Vec<Series>,
}

impl Study {
    /// Applies the same trial count to every series.
    pub fn with_trials(mut self, trials: usize) -> Self {
        self.series.iter_mut().for_each(|s| s.config.trials = trials);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.series.iter_mut().for_each(|s| s.config.seed = seed);
        self
    }
}

/// Parses and validates a single experiment config, with every omitted
/// field taking its default.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).context("malformed experiment config")?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

pub fn parse_study(text: &str) -> Result<Study> {
    let mut root: Table = toml::from_str(text).context("malformed study file")?;
    let header: StudyHeader = root
        .remove("study")
        .ok_or_else(|| anyhow!("missing [study] table"))?
        .try_into()
        .context("invalid [study] table")?;
    let overrides = match root.remove("series") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::Table(t) => Ok(t),
                _ => Err(anyhow!("every [[series]] entry must be a table")),
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => bail!("`series` must be an array of tables"),
    };

    let build = |name: String, merged: Table| -> Result<Series> {
        let config: ExperimentConfig = Value::Table(merged)
            .try_into()
            .with_context(|| format!("series `{name}`"))?;
        config.validate().with_context(|| format!("series `{name}`"))?;
        Ok(Series { name, config })
    };

    let series = if overrides.is_empty() {
        vec![build(header.name.clone(), root)?]
    } else {
        let mut out = Vec::with_capacity(overrides.len());
        for mut over in overrides {
            let name = match over.remove("name") {
                Some(Value::String(s)) => s,
                _ => bail!("every [[series]] entry needs a string `name`"),
            };
            if out.iter().any(|s: &Series| s.name == name) {
                bail!("duplicate series name `{name}`");
            }
            let mut merged = root.clone();
            merged.extend(over);
            out.push(build(name, merged)?);
        }
        out
    };
    Ok(Study { header, series })
}

/// Reads a study from a path, or from a shipped preset when `source` names
/// one and no such file exists.
pub fn load_study(source: &str) -> Result<Study> {
    let path = Path::new(source);
    let text = if path.exists() {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else if let Some(text) = presets::get(source) {
        text.to_string()
    } else {
        bail!(
            "{source}: no such file or preset (presets: {})",
            presets::NAMES.join(", ")
        );
    };
    parse_study(&text).with_context(|| format!("in {source}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_override_base_keys() {
        let study = parse_study(
            r#"
            m = 4
            trials = 10
            [study]
            name = "t"
            [[series]]
            name = "a"
            [[series]]
            name = "b"
            m = 6
            "#,
        )
        .unwrap();
        assert_eq!(study.series.len(), 2);
        assert_eq!(study.series[0].config.m, 4);
        assert_eq!(study.series[1].config.m, 6);
        assert_eq!(study.series[1].config.trials, 10);
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(parse_study("m = 4").is_err());
    }

    #[test]
    fn unknown_key_in_series_is_rejected() {
        let err = parse_study(
            r#"
            [study]
            name = "t"
            [[series]]
            name = "a"
            antennas = 4
            "#,
        )
        .unwrap_err();
        assert!(format!("{err:#}").contains("antennas"));
    }
}
