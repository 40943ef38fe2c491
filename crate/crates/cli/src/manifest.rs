use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use spherefield::tasks::ExperimentConfig;

/// Seconds since the Unix epoch.
pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

/// Record written next to a run's outputs. `[config]` is the resolved
/// experiment config, so the manifest can be passed back as `--config`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run: RunInfo,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: ExperimentConfig,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        threads: usize,
        started_unix: f64,
    ) -> Self {
        Self {
            run: RunInfo {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: config.seed,
                threads,
                inputs,
                outputs,
                started_unix,
                finished_unix: now(),
            },
            config,
        }
    }

    /// `Ok(None)` when `text` is not a manifest (no `[run]` table).
    pub fn parse(text: &str) -> Result<Option<Self>, String> {
        let table: toml::Table = toml::from_str(text).map_err(|e| e.message().to_string())?;
        if !table.contains_key("run") {
            return Ok(None);
        }
        toml::from_str(text).map(Some).map_err(|e| e.message().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}
