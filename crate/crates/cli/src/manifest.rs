use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Everything needed to rerun a report, plus how long it took.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub model_source: String,
    pub config: Value,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_ms: u128,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str, model_source: impl Into<String>, config: Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            model_source: model_source.into(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_ms: 0,
            started: Some(Instant::now()),
        }
    }

    pub fn finish(mut self) -> Self {
        if let Some(t) = self.started.take() {
            self.wall_time_ms = t.elapsed().as_millis();
        }
        self
    }
}

/// `report.csv` → `report.csv.manifest.json`.
pub fn manifest_path(report: &Path) -> PathBuf {
    let mut name = report.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `body` to `path` and the manifest beside it.
pub fn write_report(path: &Path, body: &str, manifest: &RunManifest) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    let m = manifest_path(path);
    let json = serde_json::to_string_pretty(manifest)? + "\n";
    std::fs::write(&m, json).with_context(|| format!("writing {}", m.display()))?;
    Ok(())
}
