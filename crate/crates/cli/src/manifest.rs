//! Run manifest: config hash, seed, and per-stage output checksums. The
//! manifest is rewritten after every stage so an aborted run still records
//! which stages completed and what they produced.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "MANIFEST.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub files: Vec<FileChecksum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    /// True once every planned stage has completed.
    pub complete: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot hash {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl Manifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Manifest {
            config_hash,
            seed,
            stages: Vec::new(),
            complete: false,
        }
    }

    /// Records a completed stage with checksums of its output files.
    pub fn record_stage(&mut self, name: &str, dir: &Path, files: &[&str]) -> Result<()> {
        let mut checksums = Vec::with_capacity(files.len());
        for file in files {
            checksums.push(FileChecksum {
                path: file.to_string(),
                sha256: hash_file(&dir.join(file))?,
            });
        }
        self.stages.push(StageRecord {
            name: name.to_string(),
            status: StageStatus::Complete,
            files: checksums,
            error: None,
        });
        Ok(())
    }

    pub fn record_failure(&mut self, name: &str, error: &str) {
        self.stages.push(StageRecord {
            name: name.to_string(),
            status: StageStatus::Failed,
            files: Vec::new(),
            error: Some(error.to_string()),
        });
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let raw = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Ok(serde_json::from_str(&raw)?)
    }
}
