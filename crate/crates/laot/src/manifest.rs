//! Run manifests and content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use laot_core::laot::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Content hash of the input files (see [`content_hash`]).
    pub input_hash: String,
    pub config: ExperimentConfig,
    /// Task and generator parameters for synthetic inputs, or other
    /// experiment settings.
    pub parameters: serde_json::Value,
}

/// SHA-256 over git-style blob framing (`"blob <len>\0" ++ bytes`) of each
/// input in order.
pub fn content_hash(blobs: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    for b in blobs {
        h.update(format!("blob {}\0", b.len()).as_bytes());
        h.update(b);
    }
    hex::encode(h.finalize())
}

pub fn hash_files(paths: &[PathBuf]) -> Result<String> {
    let blobs = paths
        .iter()
        .map(|p| fs::read(p).map_err(|e| Error::io(p, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(content_hash(&blobs))
}

/// First 16 hex digits of the SHA-256 of the canonical JSON of everything
/// that determines a run's results.
pub fn config_hash(
    experiment: &str,
    config: &ExperimentConfig,
    seeds: &[u64],
    input_hash: &str,
    parameters: &serde_json::Value,
) -> String {
    let key = serde_json::json!({
        "experiment": experiment,
        "config": config,
        "seeds": seeds,
        "input_hash": input_hash,
        "parameters": parameters,
    });
    // serde_json maps are ordered by key, so this is canonical.
    let digest = Sha256::digest(serde_json::to_vec(&key).expect("json value"));
    hex::encode(&digest[..8])
}

impl RunManifest {
    pub fn new(
        experiment: &str,
        config: ExperimentConfig,
        seeds: Vec<u64>,
        inputs: Vec<PathBuf>,
        input_hash: String,
        parameters: serde_json::Value,
        runs_root: &Path,
    ) -> Self {
        let config_hash = config_hash(experiment, &config, &seeds, &input_hash, &parameters);
        Self {
            experiment: experiment.into(),
            output_dir: runs_root.join(&config_hash),
            config_hash,
            seeds,
            inputs,
            input_hash,
            config,
            parameters,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn save(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        let path = self.output_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
