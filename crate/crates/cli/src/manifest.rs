//! Run manifest: which files each stage read and wrote, with content hashes.
//!
//! A stage whose recorded inputs no longer hash to what it consumed is marked
//! stale whenever any stage finishes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::formats::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, or as given for configs.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub wall_clock_s: f64,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub configs: Vec<FileEntry>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| sha256_hex(&b))
}

impl RunManifest {
    pub fn new(seed: u64) -> Self {
        Self {
            version: VERSION.into(),
            seed,
            configs: Vec::new(),
            stages: BTreeMap::new(),
        }
    }

    /// Loads the manifest in `out_dir`, or starts a new one.
    pub fn load_or_new(out_dir: &Path, seed: u64) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        match fs::read(&path) {
            Ok(bytes) => {
                let mut m: RunManifest =
                    serde_json::from_slice(&bytes).map_err(|e| CliError::format(&path, e.to_string()))?;
                if m.seed != seed {
                    // A different seed invalidates everything recorded so far.
                    m = Self::new(seed);
                }
                Ok(m)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new(seed)),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    pub fn record(&mut self, stage: &str, record: StageRecord) {
        self.stages.insert(stage.into(), record);
    }

    /// Re-hashes every stage's inputs and flags the ones that changed.
    pub fn refresh_staleness(&mut self, out_dir: &Path) {
        for rec in self.stages.values_mut() {
            rec.stale = rec
                .inputs
                .iter()
                .any(|f| hash_file(&out_dir.join(&f.path)).as_deref() != Some(f.sha256.as_str()));
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&out_dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn changed_input_marks_consumer_stale() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.bin"), b"one").unwrap();
        let mut m = RunManifest::new(1);
        m.record(
            "process",
            StageRecord {
                inputs: vec![FileEntry {
                    path: "a.bin".into(),
                    sha256: sha256_hex(b"one"),
                }],
                outputs: vec![],
                wall_clock_s: 0.0,
                stale: false,
            },
        );
        m.refresh_staleness(dir.path());
        assert!(!m.stages["process"].stale);
        fs::write(dir.path().join("a.bin"), b"two").unwrap();
        m.refresh_staleness(dir.path());
        assert!(m.stages["process"].stale);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
