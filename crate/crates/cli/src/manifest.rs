use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use incoherence::io::atomic_write;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub strict: bool,
    pub config_sha256: Option<String>,
    /// Configuration after defaults and command-line overrides.
    pub config: serde_json::Value,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Named output files held in memory until the command has succeeded.
#[derive(Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Writes every file, then the manifest, each atomically.
    pub fn commit(mut self, dir: &Path, mut manifest: RunManifest) -> std::io::Result<RunManifest> {
        fs::create_dir_all(dir)?;
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        manifest.outputs.clear();
        for (name, bytes) in &self.files {
            atomic_write(&dir.join(name), bytes)?;
            manifest.outputs.push(OutputDigest { path: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        }
        let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        atomic_write(&dir.join(MANIFEST_NAME), format!("{text}\n").as_bytes())?;
        Ok(manifest)
    }
}
