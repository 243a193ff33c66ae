use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::Usage;

/// Everything needed to rerun a command: inputs, options and outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// `None` when the bundled system was used.
    pub system: Option<PathBuf>,
    pub command: String,
    pub options: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(system: Option<&Path>, command: impl Into<String>, seed: u64) -> Self {
        Self {
            system: system.map(Path::to_path_buf),
            command: command.into(),
            options: BTreeMap::new(),
            outputs: Vec::new(),
            seed,
        }
    }

    pub fn option(&mut self, key: &str, value: impl Serialize) {
        self.options
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    /// Checks that input paths exist and the output directory can be made.
    pub fn check_inputs(&self, inputs: &[&Path], out: &Path) -> Result<()> {
        for p in self.system.iter().map(PathBuf::as_path).chain(inputs.iter().copied()) {
            if !p.is_file() {
                return Err(Usage(format!("input file `{}` not found", p.display())).into());
            }
        }
        std::fs::create_dir_all(out)
            .map_err(|e| Usage(format!("cannot create output directory `{}`: {e}", out.display())))?;
        Ok(())
    }

    /// Writes `bytes` to `out/name` and records the path.
    pub fn write(&mut self, out: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = out.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn save(&mut self, out: &Path) -> Result<()> {
        let path = out.join("manifest.json");
        self.outputs.push(path.clone());
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
