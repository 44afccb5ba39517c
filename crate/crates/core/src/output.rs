//! Run directories: result files plus one manifest listing them.

use crate::config::hash_json;
use crate::error::{Error, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub wall_time_s: f64,
    pub files: Vec<String>,
}

pub struct RunDir {
    path: PathBuf,
    subcommand: String,
    config: serde_json::Value,
    seed: u64,
    started: String,
    clock: Instant,
    files: Vec<String>,
}

fn now() -> String {
    chrono::Local::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `./runs/<local timestamp>`.
pub fn default_run_path() -> PathBuf {
    PathBuf::from("runs").join(chrono::Local::now().format("%Y%m%dT%H%M%S%.3f").to_string())
}

impl RunDir {
    pub fn create(path: &Path, subcommand: &str, config: serde_json::Value, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(path)
            .map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", path.display())))?;
        let probe = path.join(".write-test");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| Error::Io(format!("output directory {} is not writable: {e}", path.display())))?;
        Ok(RunDir {
            path: path.to_path_buf(),
            subcommand: subcommand.to_string(),
            config,
            seed,
            started: now(),
            clock: Instant::now(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Path for a new output file, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.path.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.file(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&p, text + "\n")?;
        Ok(p)
    }

    /// Writes the manifest; fails if any listed file is missing or empty.
    pub fn finish(self) -> Result<RunManifest> {
        for f in &self.files {
            let len = std::fs::metadata(self.path.join(f)).map(|m| m.len()).unwrap_or(0);
            if len == 0 {
                return Err(Error::Io(format!("output file {f} is missing or empty")));
            }
        }
        let manifest = RunManifest {
            subcommand: self.subcommand,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash_json(&self.config),
            config: self.config,
            seed: self.seed,
            started: self.started,
            finished: now(),
            wall_time_s: self.clock.elapsed().as_secs_f64(),
            files: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(self.path.join(MANIFEST_NAME), text + "\n")?;
        Ok(manifest)
    }
}
