use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub seconds: f64,
    pub complete: bool,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub heldout_stress: f64,
    pub heldout_mean_distance: f64,
    pub relative_stress: f64,
    pub heldout_pairs: usize,
    pub excluded_memories: Vec<usize>,
}

/// Record of everything produced in one output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    /// SHA-256 of the serialized config; outputs depend on nothing else.
    pub input_hash: String,
    pub commands: BTreeMap<String, CommandRecord>,
    /// Every file in the output directory except this manifest, keyed by relative path.
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    pub embedding: Option<EmbeddingSummary>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            input_hash: config_hash(config)?,
            commands: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            embedding: None,
            warnings: Vec::new(),
        })
    }

    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
    }

    /// Re-hashes every file under `dir` and writes the manifest.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.artifacts = hash_tree(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(config)?)))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Checksums of all regular files under `dir` other than the manifest,
/// keyed by `/`-separated relative path.
pub fn hash_tree(dir: &Path) -> Result<BTreeMap<String, ArtifactRecord>> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir)?;
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if key == MANIFEST_FILE {
            continue;
        }
        out.insert(
            key,
            ArtifactRecord {
                sha256: sha256_file(entry.path())?,
                bytes: entry.metadata()?.len(),
            },
        );
    }
    Ok(out)
}
