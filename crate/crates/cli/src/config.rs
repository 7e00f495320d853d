use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::fail::{CliError, CliResult};

/// Optional TOML file whose values override command-line flags. Each
/// command reads its own table; the remaining tables tune the core
/// configurations.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub gen: Option<toml::Table>,
    pub fit: Option<toml::Table>,
    pub assimilate: Option<toml::Table>,
    pub evaluate: Option<toml::Table>,
    pub sweep: Option<toml::Table>,
    pub bench: Option<toml::Table>,
    pub filter: Option<toml::Table>,
    pub kalman: Option<toml::Table>,
    pub simplex: Option<toml::Table>,
    pub kf_grid: Option<toml::Table>,
    pub jitter: Option<toml::Table>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(crate::fail::input("config file", path))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Applies a config table on top of `base`. Keys that do not name a field
/// are rejected.
pub fn overlay<T: Serialize + DeserializeOwned>(base: T, over: Option<&toml::Table>, section: &str) -> CliResult<T> {
    let Some(over) = over else { return Ok(base) };
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("config [{section}]: {e}"));
    let mut table = toml::Table::try_from(&base).map_err(|e| bad(&e))?;
    merge(&mut table, over);
    let out: T = table.try_into().map_err(|e| bad(&e))?;
    let known = toml::Table::try_from(&out).map_err(|e| bad(&e))?;
    if let Some(k) = over.keys().find(|k| !known.contains_key(*k)) {
        return Err(bad(&format!("unknown key '{k}'")));
    }
    Ok(out)
}
