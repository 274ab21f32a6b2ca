//! Run provenance: what was run, with which seed, and what it produced.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    /// Unix timestamps (seconds). Timestamps live only here, never in
    /// report files, so reports stay byte-reproducible.
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn begin(config_hash: &str, seed: u64) -> Self {
        RunManifest {
            config_hash: config_hash.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix: now(),
            finished_unix: 0.0,
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, relative_path: impl Into<String>) {
        self.artifacts.push(relative_path.into());
    }

    /// Stamp the finish time and write `manifest.json` last, after checking
    /// that every recorded artifact actually exists.
    pub fn finish(mut self, out_dir: &Path) -> Result<()> {
        for rel in &self.artifacts {
            let p = out_dir.join(rel);
            if !p.exists() {
                return Err(Error::Format(format!(
                    "manifest lists missing artifact `{rel}`"
                )));
            }
        }
        self.finished_unix = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::begin("abc", 1);
        m.record("not_there.csv");
        assert!(m.finish(dir.path()).is_err());

        let mut m = RunManifest::begin("abc", 1);
        std::fs::write(dir.path().join("there.csv"), "x\n").unwrap();
        m.record("there.csv");
        m.finish(dir.path()).unwrap();
        assert!(dir.path().join("manifest.json").exists());
    }
}
