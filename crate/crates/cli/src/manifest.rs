//! Per-run manifest: resolved configuration, input checksums, outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use rul_core::persistence::sha256_hex;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<InputFile>,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            seed: None,
            started: now(),
            finished: String::new(),
            outputs: Vec::new(),
        })
    }

    /// Reads `path` for its checksum and returns the contents.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| rul_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(mut self, path: &Path) -> Result<PathBuf> {
        self.finished = now();
        self.outputs.push(path.display().to_string());
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path.to_path_buf())
    }
}
