//! Parameter sweeps: one scenario, one dotted key, several values.

use crate::parallel::{map, Execution};

use super::{run, ScenarioConfig, SimError, Summary};

/// Parses a comma-separated list of TOML scalars, e.g. `0.1,0.2,0.3`.
pub fn parse_values(list: &str) -> Result<Vec<toml::Value>, SimError> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            let doc: toml::Table = toml::from_str(&format!("v = {v}"))
                .or_else(|_| toml::from_str(&format!("v = \"{v}\"")))
                .map_err(|e| SimError::Config(format!("bad sweep value '{v}': {e}")))?;
            Ok(doc["v"].clone())
        })
        .collect()
}

/// Returns a copy of `base` with the dotted `path` set to `value`. Missing
/// intermediate tables are created; the result is validated as a scenario.
pub fn with_param(base: &ScenarioConfig, path: &str, value: &toml::Value) -> Result<ScenarioConfig, SimError> {
    let mut doc: toml::Value = toml::Value::try_from(base).map_err(|e| SimError::Config(e.to_string()))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(SimError::Config(format!("bad parameter path '{path}'")));
    }
    let mut node = &mut doc;
    for key in &keys[..keys.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| SimError::Config(format!("'{key}' in '{path}' is not a table")))?;
        node = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| SimError::Config(format!("parent of '{path}' is not a table")))?;
    table.insert(keys[keys.len() - 1].to_string(), value.clone());
    let text = toml::to_string(&doc).map_err(|e| SimError::Config(e.to_string()))?;
    ScenarioConfig::from_toml(&text)
}

#[derive(Debug)]
pub struct SweepResult {
    pub value: toml::Value,
    pub summary: Result<Summary, SimError>,
}

/// Builds every variant first so that configuration errors surface before any
/// simulation starts, then runs the variants with independent state.
pub fn sweep(
    base: &ScenarioConfig,
    path: &str,
    values: &[toml::Value],
    exec: Execution,
) -> Result<Vec<SweepResult>, SimError> {
    let variants = values
        .iter()
        .map(|v| with_param(base, path, v))
        .collect::<Result<Vec<_>, _>>()?;
    let summaries = map(exec, &variants, |cfg| run(cfg).map(|o| o.summary));
    Ok(values
        .iter()
        .cloned()
        .zip(summaries)
        .map(|(value, summary)| SweepResult { value, summary })
        .collect())
}
