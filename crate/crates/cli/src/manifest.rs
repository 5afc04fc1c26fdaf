use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use augbench::providers::{sha256_hex, CacheMode};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        Ok(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheSummary {
    pub dir: String,
    pub mode: CacheMode,
    /// Digests of every cache entry read or written during the run.
    pub digests: Vec<String>,
}

/// Everything needed to reproduce a command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheSummary>,
    pub network_calls: usize,
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// What a stage read, wrote and spent. Merged across stages by `run-all`.
#[derive(Debug, Default, Clone)]
pub struct StageRecord {
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub cache: Option<CacheSummary>,
    pub network_calls: usize,
}

impl StageRecord {
    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn merge(&mut self, other: StageRecord) {
        self.seeds.extend(other.seeds);
        for p in other.inputs {
            // Files produced earlier in the same run are not external inputs.
            if !self.artifacts.contains(&p) && !self.inputs.contains(&p) {
                self.inputs.push(p);
            }
        }
        self.artifacts.extend(other.artifacts);
        self.network_calls += other.network_calls;
        match (&mut self.cache, other.cache) {
            (Some(mine), Some(theirs)) => {
                mine.digests.extend(theirs.digests);
                mine.digests.sort();
                mine.digests.dedup();
            }
            (None, theirs) => self.cache = theirs,
            _ => {}
        }
    }

    /// Hashes inputs and artifacts and writes `manifest-<command>.json` into
    /// the output directory.
    pub fn write_manifest(&self, command: &str, config: &PipelineConfig, started_at: u64) -> Result<PathBuf> {
        let hash_all = |paths: &[PathBuf]| -> Result<Vec<FileHash>> {
            let mut seen = Vec::new();
            let mut out = Vec::new();
            for p in paths {
                if !seen.contains(p) {
                    seen.push(p.clone());
                    out.push(FileHash::of(p)?);
                }
            }
            Ok(out)
        };
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            seeds: self.seeds.clone(),
            inputs: hash_all(&self.inputs)?,
            artifacts: hash_all(&self.artifacts)?,
            cache: self.cache.clone(),
            network_calls: self.network_calls,
            started_at,
            finished_at: unix_now(),
        };
        let path = config.output_dir.join(format!("manifest-{command}.json"));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
