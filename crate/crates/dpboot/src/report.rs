//! `summary.json` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use dpboot_core::{credible_interval, PosteriorDraws};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Interval endpoints; absent when there are fewer than 20 draws.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub loss: String,
    pub alpha: f64,
    pub level: f64,
    pub draws: usize,
    pub nonconverged: usize,
    pub coordinates: Vec<CoordinateSummary>,
}

impl Summary {
    pub fn new(draws: &PosteriorDraws, loss: String, alpha: f64, level: f64) -> Result<Self> {
        let mut coordinates = Vec::with_capacity(draws.dim());
        for j in 0..draws.dim() {
            let (lo, hi) = if draws.len() >= 20 {
                let (lo, hi) = credible_interval(draws, j, level)?;
                (Some(lo), Some(hi))
            } else {
                (None, None)
            };
            coordinates.push(CoordinateSummary {
                name: format!("theta_{}", j + 1),
                mean: draws.mean(j),
                sd: draws.sd(j),
                lo,
                hi,
            });
        }
        Ok(Summary {
            loss,
            alpha,
            level,
            draws: draws.len(),
            nonconverged: draws.nonconverged(),
            coordinates,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest_file(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(InputDigest {
        role: role.to_owned(),
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Record of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, threads: usize) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_owned(),
                seed,
                threads,
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
            },
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> &mut Self {
        self.manifest.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<&mut Self> {
        self.manifest.inputs.push(digest_file(role, path)?);
        Ok(self)
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        self.manifest.outputs.push(name.to_owned());
        self
    }

    /// Writes `manifest.json` into `dir`; the manifest lists itself last.
    pub fn finish(&mut self, dir: &Path) -> Result<RunManifest> {
        self.output("manifest.json");
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        crate::io::write_json(&dir.join("manifest.json"), &self.manifest)?;
        Ok(self.manifest.clone())
    }
}
