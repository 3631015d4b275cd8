use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CbmapError, Result};

/// Record of one CLI run, written as `<primary output stem>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name; re-running them reproduces the outputs.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub metrics: Option<serde_json::Value>,
    pub elapsed_s: f64,
}

impl RunManifest {
    pub(crate) fn new(
        command: &str,
        config: serde_json::Value,
        seed: u64,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: Vec::new(),
            config,
            seed,
            inputs,
            outputs,
            metrics: None,
            elapsed_s: 0.0,
        }
    }

    pub fn path_for(primary_output: &Path) -> PathBuf {
        let stem = primary_output
            .file_stem()
            .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        primary_output.with_file_name(format!("{stem}.manifest.json"))
    }

    pub(crate) fn write_next_to(&self, primary_output: &Path) -> Result<()> {
        let path = Self::path_for(primary_output);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| CbmapError::io(&path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CbmapError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
