use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use ralm_core::RalmError;

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub spec: String,
    pub name: String,
    pub max_context_tokens: usize,
    /// Digest of the model file for built-in backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_fingerprint: Option<String>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    /// SHA-256 of each input file, keyed by flag name.
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank_backend: Option<BackendInfo>,
    pub timestamp: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Self {
        RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: BTreeMap::new(),
            corpus_fingerprint: None,
            index_fingerprint: None,
            backend: None,
            rerank_backend: None,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn input(&mut self, flag: &str, path: &Path) -> Result<(), Failure> {
        self.inputs
            .insert(flag.to_string(), file_fingerprint(path)?);
        Ok(())
    }
}

pub fn file_fingerprint(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| RalmError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    manifest: &'a RunManifest,
    result: &'a T,
}

/// Writes `{manifest, result}` as pretty JSON.
pub fn write_report<T: Serialize>(
    path: &Path,
    manifest: &RunManifest,
    result: &T,
) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(&Report { manifest, result })
        .map_err(|e| Failure::data(format!("cannot encode report: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| RalmError::io(path, e).into())
}

/// `<out>.manifest.json`, written next to artifacts that are not reports.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn write_sidecar(out: &Path, manifest: &RunManifest) -> Result<(), Failure> {
    let path = sidecar_path(out);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| RalmError::io(&path, e).into())
}
