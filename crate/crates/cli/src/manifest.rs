use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::scenario::Artifact;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Value,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn entry(a: &Artifact) -> FileEntry {
    FileEntry { name: a.name.clone(), bytes: a.bytes.len() as u64, sha256: sha256_hex(&a.bytes) }
}

/// Writes the artifacts into `dir`, refusing directories that hold files
/// this run would not list.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<FileEntry>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let ours = |name: &str| name == MANIFEST_NAME || artifacts.iter().any(|a| a.name == name);
    for item in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let item = item.map_err(|e| CliError::io(dir, e))?;
        let name = item.file_name().to_string_lossy().into_owned();
        if !ours(&name) {
            return Err(CliError::validation("out", format!("{} already contains {name}, which this run would not produce", dir.display())));
        }
    }
    let mut entries = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        entries.push(entry(a));
    }
    entries.sort_by(|x, y| x.name.cmp(&y.name));
    Ok(entries)
}

pub fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), CliError> {
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(m).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}
