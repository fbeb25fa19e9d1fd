//! Config files and reports.

use std::path::Path;

use anyhow::Result;
use mtcurate::chimera::{default_grid, BackendSpec, GenerationParams, DEFAULT_CONCURRENCY};
use mtcurate::filters::ScorerEndpoint;
use mtcurate::jsonl::{read_json, write_json, JsonlError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::errors::{invalid, runtime};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Reads a JSON config. Unreadable files are runtime errors; malformed or
/// unknown keys are validation errors.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path).map_err(|e| match e {
        JsonlError::Io { .. } => runtime(e),
        other => invalid(other),
    })
}

/// Writes `{schema_version, command, seed, ...body}` when a report path was given.
pub fn write_report(path: Option<&Path>, command: &str, seed: u64, body: Value) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut map = Map::new();
    map.insert("schema_version".into(), REPORT_SCHEMA_VERSION.into());
    map.insert("command".into(), command.into());
    map.insert("seed".into(), seed.into());
    match body {
        Value::Object(m) => map.extend(m),
        Value::Null => {}
        other => {
            map.insert("result".into(), other);
        }
    }
    write_json(path, &Value::Object(map)).map_err(runtime)
}

fn default_concurrency() -> usize {
    DEFAULT_CONCURRENCY
}

/// Candidate generation and fusion settings for `translate` and `fuse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChimeraConfig {
    /// One backend shared by every grid slot, or one per slot.
    pub backends: Vec<BackendSpec>,
    /// Backend that merges candidates; only `fuse` needs it.
    #[serde(default)]
    pub fusion_backend: Option<BackendSpec>,
    /// Sampling grid; defaults to six settings seeded from the run seed.
    #[serde(default)]
    pub grid: Option<Vec<GenerationParams>>,
    #[serde(default)]
    pub fusion_params: GenerationParams,
    /// Picks the best candidate when fusion fails.
    #[serde(default)]
    pub fallback_scorer: Option<ScorerEndpoint>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ChimeraConfig {
    pub fn grid(&self, seed: u64) -> Vec<GenerationParams> {
        self.grid.clone().unwrap_or_else(|| default_grid(seed))
    }

    pub fn validate(&self, seed: u64) -> Result<()> {
        let grid = self.grid(seed);
        if self.backends.is_empty() {
            return Err(invalid("`backends` must list at least one backend"));
        }
        if self.backends.len() != 1 && self.backends.len() != grid.len() {
            return Err(invalid(format!(
                "{} backends for a grid of {}; give one shared backend or one per slot",
                self.backends.len(),
                grid.len()
            )));
        }
        if grid.len() < 2 {
            return Err(invalid(format!("grid needs at least 2 entries, got {}", grid.len())));
        }
        if self.concurrency == 0 {
            return Err(invalid("concurrency must be >= 1"));
        }
        for p in grid.iter().chain(std::iter::once(&self.fusion_params)) {
            p.validate().map_err(invalid)?;
        }
        Ok(())
    }
}
