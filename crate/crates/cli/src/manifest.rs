//! `manifest.json`: what produced a campaign directory and how to reproduce it.

use crate::config::{ConfigFormat, LoadedConfig};
use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: String,
    /// Hex SHA-256 of `config_text`.
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub config_format: ConfigFormat,
    pub config_text: String,
    /// Directory relative config paths were resolved against.
    pub base_dir: PathBuf,
    /// Files written, relative to the campaign directory, sorted.
    pub artifacts: Vec<String>,
}

pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(loaded: &LoadedConfig, task: &str, seed: u64, threads: usize, mut artifacts: Vec<String>) -> Self {
        artifacts.sort();
        artifacts.dedup();
        Manifest {
            tool: "vps".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            task: task.into(),
            config_hash: config_hash(&loaded.text),
            seed,
            threads,
            config_format: loaded.format,
            config_text: loaded.text.clone(),
            base_dir: loaded.base_dir.clone(),
            artifacts,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Artifact {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> CliResult<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(CliError::MissingArtifact(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Artifact { path, msg: e.to_string() })
    }
}
