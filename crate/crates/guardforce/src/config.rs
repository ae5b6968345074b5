//! Scenario files and key=value overrides.
//!
//! A scenario file is the [`Scenario`] struct in TOML with a versioned
//! `schema` field. Overrides are dotted paths into that tree
//! (`safety.f_max=2`, `environment.stiffness=800`); precedence is
//! command line over file over built-in defaults.

use crate::sim::{builtins, Scenario};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
    #[error("unknown scenario `{name}`; built-ins: {available}")]
    UnknownScenario { name: String, available: String },
}

/// Where a run's scenario comes from; exactly one source per run.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Builtin(String),
    File(std::path::PathBuf),
}

pub fn scenario_to_toml(s: &Scenario) -> Result<String, ConfigError> {
    toml::to_string_pretty(s).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn scenario_from_toml(text: &str) -> Result<Scenario, ConfigError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    scenario
        .validate()
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    Ok(scenario)
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scenario_from_toml(&text)
}

/// Resolve a scenario source and apply command-line overrides on top.
pub fn resolve(
    source: &ScenarioSource,
    overrides: &[(String, String)],
) -> Result<Scenario, ConfigError> {
    let base = match source {
        ScenarioSource::Builtin(name) => {
            builtins::builtin(name).ok_or_else(|| ConfigError::UnknownScenario {
                name: name.clone(),
                available: builtins::builtin_scenarios()
                    .iter()
                    .map(|s| s.name.clone())
                    .collect::<Vec<_>>()
                    .join(", "),
            })?
        }
        ScenarioSource::File(path) => load_scenario_file(path)?,
    };
    apply_overrides(&base, overrides)
}

/// Apply dotted-path overrides onto a scenario.
pub fn apply_overrides(
    scenario: &Scenario,
    overrides: &[(String, String)],
) -> Result<Scenario, ConfigError> {
    if overrides.is_empty() {
        return Ok(scenario.clone());
    }
    let mut tree = toml::Value::try_from(scenario)
        .map_err(|e| ConfigError::Parse(format!("serialize: {e}")))?;
    for (path, raw) in overrides {
        set_path(&mut tree, path, parse_scalar(raw))
            .map_err(|msg| ConfigError::Override(format!("{path}={raw}"), msg))?;
    }
    let scenario: Scenario = tree
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    scenario
        .validate()
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    Ok(scenario)
}

/// Apply one numeric override; convenience for parameter sweeps.
pub fn apply_value(scenario: &Scenario, param: &str, value: f64) -> Result<Scenario, ConfigError> {
    apply_overrides(scenario, &[(param.to_string(), format!("{value:?}"))])
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}

fn set_path(root: &mut toml::Value, dotted: &str, value: toml::Value) -> Result<(), String> {
    let mut node = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err("empty path segment".into());
    }
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| format!("`{part}` is not a table"))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| "parent is not a table".to_string())?;
    table.insert(parts.last().unwrap().to_string(), value);
    Ok(())
}
