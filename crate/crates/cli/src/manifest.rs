use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Fully resolved configuration, after defaults, config file and flags.
    pub config: serde_json::Value,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        structformer::model::write_atomic(path, json.as_bytes())
            .with_context(|| format!("writing {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
