//! On-disk artifact formats and helpers for deterministic output.

use std::path::Path;

use anyhow::{Context, Result};
use conflictlens::event_model::{write_events, CriticalEvent};
use conflictlens::imbalance::Balance;
use conflictlens::model::{Family, Model, ModelParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Short hex digest of any serializable config.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

/// Per-event digest used to detect train/test overlap.
pub fn fingerprint(event: &CriticalEvent) -> String {
    let mut e = event.clone();
    e.label = None;
    let mut buf = Vec::new();
    write_events(&mut buf, std::slice::from_ref(&e)).expect("in-memory write");
    hex::encode(&Sha256::digest(&buf)[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub family: Family,
    pub balance: Balance,
    pub params: ModelParams,
    pub columns: Vec<String>,
    /// Fingerprints of the training events, sorted.
    pub train_fingerprints: Vec<String>,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub config_hash: String,
    pub seed: u64,
    pub test_fraction: f64,
    /// Row ids (0-based data rows of the input CSV after filtering).
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
