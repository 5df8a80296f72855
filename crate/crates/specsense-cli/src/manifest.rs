//! Run manifests: everything needed to reproduce a run from its inputs.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::config::AppConfig;

/// Parameters chosen at run time (as opposed to configured).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChosenParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_w_per_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_dbm_per_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pfa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One manifest per command invocation, written next to the outputs. A run
/// is reproducible from the manifest's config snapshot plus its inputs;
/// the timestamp is informational and excluded from any byte-identity
/// comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub timestamp_utc: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: AppConfig,
    pub chosen: ChosenParams,
}

impl RunManifest {
    pub fn new(command: &str, config: &AppConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_utc: chrono::Utc::now().to_rfc3339(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: config.clone(),
            chosen: ChosenParams::default(),
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        specsense_core::io::atomic_write(path, text.as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
