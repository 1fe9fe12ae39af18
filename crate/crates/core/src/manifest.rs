//! Run manifests: software version, configuration hash, seed, timestamps and
//! SHA-256 digests of every file read or written.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SOFTWARE: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON form of the configuration.
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Command-specific facts such as event counts.
    #[serde(default)]
    pub info: serde_json::Map<String, serde_json::Value>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(config)?.as_bytes()))
}

impl RunManifest {
    pub fn start<T: Serialize>(command: &str, config: &T, seed: u64) -> Result<Self> {
        Ok(Self {
            software: SOFTWARE.into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash: config_hash(config)?,
            seed,
            started_unix: now_unix(),
            finished_unix: 0.0,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            info: serde_json::Map::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Record an output under a name relative to `root` when possible.
    pub fn output(&mut self, root: &Path, path: &Path) -> Result<()> {
        let key = path.strip_prefix(root).unwrap_or(path).display().to_string();
        self.outputs.insert(key, sha256_file(path)?);
        Ok(())
    }

    pub fn note<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.info.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Stamp the finish time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_unix = now_unix();
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self)?)?;
        Ok(self)
    }

    /// Digests of the recorded outputs that no longer match the files under `root`.
    pub fn verify_outputs(&self, root: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (k, d) in &self.outputs {
            if sha256_file(&root.join(k))? != *d {
                bad.push(k.clone());
            }
        }
        Ok(bad)
    }
}
