//! Run manifest: every command leaves a `manifest.json` next to its outputs
//! recording the tool version, full config snapshot, input digests (taken
//! before any processing), the per-subject inclusion log, and the output
//! list. No clock values appear anywhere, so reruns with identical inputs,
//! config, and seed produce byte-identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::formats::{atomic_write, file_digest, FileError};

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct SubjectRecord {
    pub id: String,
    /// "included", "excluded", "failed", or "generated".
    pub status: String,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputRecord>,
    pub subjects: Vec<SubjectRecord>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &PipelineConfig) -> RunManifest {
        RunManifest {
            tool: "ecgtrend".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: cfg.seed,
            config: cfg.snapshot(),
            inputs: Vec::new(),
            subjects: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Digest one input file; call before the file is parsed so the
    /// manifest witnesses exactly what the run consumed.
    pub fn record_input(&mut self, path: &Path) -> Result<(), FileError> {
        let sha256 = file_digest(path)?;
        self.inputs.push(InputRecord {
            path: display_name(path),
            sha256,
        });
        Ok(())
    }

    pub fn record_subject(&mut self, id: &str, status: &str, detail: String) {
        self.subjects.push(SubjectRecord {
            id: id.to_string(),
            status: status.to_string(),
            detail,
        });
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(display_name(path));
    }

    /// Write `manifest.json` into the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, FileError> {
        let path = out_dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        atomic_write(&path, &bytes)?;
        Ok(path)
    }
}

/// File name only: manifests must not change when the same tree is mounted
/// at a different absolute path.
fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
