//! Machine-readable run logs: enough to reproduce a stage byte-identically.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunLog {
    pub tool: &'static str,
    pub version: &'static str,
    pub stage: String,
    pub seed: u64,
    pub jobs: usize,
    /// Full config snapshot after flag overrides.
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl RunLog {
    pub fn new(stage: &str, seed: u64, jobs: usize, config: serde_json::Value) -> Self {
        Self {
            tool: "envtrack",
            version: env!("CARGO_PKG_VERSION"),
            stage: stage.to_string(),
            seed,
            jobs,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn write(&self, stage_dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(stage_dir.join("run.json"), text + "\n")?;
        Ok(())
    }
}

pub fn hash_file(path: &Path) -> anyhow::Result<FileHash> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256,
    })
}
