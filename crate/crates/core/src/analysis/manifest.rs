use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance for one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8], seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            timings_ms: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.timings_ms.insert(stage.into(), t.elapsed().as_secs_f64() * 1e3);
        v
    }

    /// Writes `bytes` to `dir/name` and records its hash.
    pub fn write_output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(dir.join(name), bytes)?;
        self.outputs.retain(|o| o.name != name);
        self.outputs.push(OutputEntry {
            name: name.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        self.outputs.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(())
    }

    /// Everything that must match between runs with the same config, seed and version.
    pub fn fingerprint(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self
            .outputs
            .iter()
            .map(|o| (o.name.clone(), o.sha256.clone()))
            .collect();
        m.insert("config".into(), self.config_sha256.clone());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("version".into(), self.tool_version.clone());
        m
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
