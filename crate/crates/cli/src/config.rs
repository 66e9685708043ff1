//! Run configuration: a single JSON document covering every stage, with CLI
//! flags overriding individual fields. Flags win over the file.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use denseblock_core::pipeline::PipelineConfig;
use denseblock_core::synth::{InjectionSpec, SearchSpace};

/// Usage/configuration problem; maps to exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Fingerprint report knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerprintConfig {
    /// Number of globally most popular hashtags per fingerprint.
    pub m: usize,
    /// Equal-width histogram bins over [0,1] for clustering coefficients.
    pub bins: usize,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig { m: 30, bins: 20 }
    }
}

/// Random-search section of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub space: SearchSpace,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            space: SearchSpace::default(),
            trials: 30,
            seed: 42,
        }
    }
}

/// The resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub edge_file: Option<PathBuf>,
    pub attribute_file: Option<PathBuf>,
    /// Pre-ingested graph snapshot; used instead of the TSV inputs when set.
    pub graph_snapshot: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub fingerprint: FingerprintConfig,
    pub injection: Option<InjectionSpec>,
    pub search: Option<SearchConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let config: RunConfig = serde_json::from_str(&raw).map_err(|e| {
            ConfigError(format!("config file {} is not valid: {e}", path.display()))
        })?;
        Ok(config)
    }

    /// Canonical JSON used for hashing and for `resolved_config.json`.
    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON identifying the run's inputs: the output directory is excluded so
    /// the same configuration hashes identically wherever it writes.
    pub fn to_hashable_json(&self) -> Result<String> {
        let mut stripped = self.clone();
        stripped.output_dir = None;
        Ok(serde_json::to_string(&stripped)?)
    }

    /// Output directory: explicit flag/config value, else
    /// `$DENSEBLOCK_OUTPUT_ROOT/run-<hash8>` (root defaults to `./runs`).
    pub fn resolve_output_dir(&self, config_hash: &str) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        let root = std::env::var("DENSEBLOCK_OUTPUT_ROOT").unwrap_or_else(|_| "runs".to_string());
        Path::new(&root).join(format!("run-{}", &config_hash[..8.min(config_hash.len())]))
    }
}
