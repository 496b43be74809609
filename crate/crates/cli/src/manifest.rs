use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub started_unix_s: u64,
    pub elapsed_ms: u128,
}

/// Record of one run: enough to repeat it and check that the inputs are
/// the same files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub tool_version: String,
    pub timings: Timings,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub struct ManifestBuilder {
    command: String,
    started: Instant,
    started_unix: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    pub fn finish(self, jobs: usize) -> std::io::Result<RunManifest> {
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for p in &self.inputs {
            inputs.push(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
        Ok(RunManifest {
            command: self.command,
            arguments: std::env::args().skip(1).collect(),
            config: self.config,
            inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            seed: self.seed,
            jobs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timings: Timings {
                started_unix_s: self.started_unix,
                elapsed_ms: self.started.elapsed().as_millis(),
            },
        })
    }
}
