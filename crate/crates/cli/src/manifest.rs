use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::fail::CliResult;

/// Provenance of one command run, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub timestamp_unix_s: u64,
    /// Arguments and core settings after flags and config were merged.
    pub effective_config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config_file: Option<&Path>, seed: Option<u64>, effective_config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            config_file: config_file.map(Path::to_path_buf),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            effective_config,
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.to_path_buf());
        self
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Manifest location for a file output: `prior.lssm` gives
/// `prior.manifest.json`.
pub fn beside(file: &Path) -> PathBuf {
    file.with_extension("manifest.json")
}
