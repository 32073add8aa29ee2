//! Provenance attached to every output file, and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<Artifact>,
    /// Files written earlier in the same run.
    pub outputs: Vec<Artifact>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunRecord {
    pub fn start(command: &str, config: serde_json::Value, seed: u64) -> Self {
        let t = now();
        RunRecord {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            seed,
            started_unix: t,
            finished_unix: t,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads an input file, recording its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))
    }

    /// Writes an output atomically and records its hash.
    pub fn write_output(&mut self, path: &Path, contents: &[u8]) -> Result<(), CliError> {
        write_atomic(path, contents)?;
        self.outputs.push(Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    pub fn finish(&mut self) -> serde_json::Value {
        self.finished_unix = now();
        serde_json::to_value(&*self).expect("record serializes")
    }
}

/// Writes to a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
