use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to the outputs of a run. Outputs refer
/// to it by file name; it is the only artifact carrying timestamps, so
/// reruns with equal inputs leave every other file byte-identical.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_digest: String,
    pub seed: u64,
    pub seed_generated: bool,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    command_line: Vec<String>,
    hasher: Sha256,
    seed: u64,
    seed_generated: bool,
    started: String,
    outputs: Vec<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn new(seed: u64, seed_generated: bool) -> Self {
        Self {
            command_line: std::env::args().collect(),
            hasher: Sha256::new(),
            seed,
            seed_generated,
            started: now(),
            outputs: Vec::new(),
        }
    }

    /// Folds an input (argument text or file contents) into the digest.
    pub fn digest(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command_line: self.command_line,
            config_digest: format!("{:x}", self.hasher.finalize()),
            seed: self.seed,
            seed_generated: self.seed_generated,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started,
            finished: now(),
            outputs: self.outputs,
        }
    }
}

/// `<stem>.manifest.json` beside `out`, with any extension dropped.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
