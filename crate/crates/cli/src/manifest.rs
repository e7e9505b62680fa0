use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::args::Command;

/// Written next to every output as `<output>.manifest.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Command,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn write(&self) -> Result<()> {
        let Some(first) = self.outputs.first() else {
            return Ok(());
        };
        let path = manifest_path(first);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
