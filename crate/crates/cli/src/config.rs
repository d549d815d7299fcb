use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pcvstream::sim::{Policy, Scenario};
use serde::Deserialize;

use crate::UsageError;

/// Recorded traces that replace the synthetic generators.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracePaths {
    pub video: Option<PathBuf>,
    pub fov: Option<PathBuf>,
    pub bandwidth: Option<PathBuf>,
}

/// Overlays `user` on `base`, table by table. A table whose `kind` changes
/// is replaced whole, since its other keys belong to the old variant.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u))
                if b.get("kind") == u.get("kind") || !u.contains_key("kind") =>
            {
                merge(b, u)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Experiment manifest. Tables override the reference benchmark key by
/// key; relative paths are taken from the manifest's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct Manifest {
    pub seed: u64,
    /// Every policy when empty.
    pub policies: Vec<Policy>,
    pub out: Option<PathBuf>,
    pub traces: TracePaths,
    #[serde(flatten)]
    pub scenario: Scenario,
}

impl Manifest {
    pub fn load(path: Option<&Path>) -> Result<Manifest> {
        let Some(path) = path else {
            return Ok(Manifest::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let bad = |e: &dyn std::fmt::Display| UsageError(format!("{}: {e}", path.display()));
        let user: toml::Table = toml::from_str(&text).map_err(|e| bad(&e))?;
        let mut merged = toml::Table::try_from(Scenario::benchmark()).map_err(|e| bad(&e))?;
        merge(&mut merged, user);
        let mut m: Manifest = merged.try_into().map_err(|e: toml::de::Error| bad(&e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut m.traces.video,
            &mut m.traces.fov,
            &mut m.traces.bandwidth,
            &mut m.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    pub fn policies(&self) -> Vec<Policy> {
        if self.policies.is_empty() {
            Policy::ALL.to_vec()
        } else {
            self.policies.clone()
        }
    }

    /// Fails with the offending path when a referenced trace is missing.
    pub fn check_paths(&self) -> Result<()> {
        let t = &self.traces;
        for p in [&t.video, &t.fov, &t.bandwidth].into_iter().flatten() {
            if !p.is_file() {
                return Err(UsageError(format!("trace file not found: {}", p.display())).into());
            }
        }
        self.scenario
            .validate()
            .map_err(|e| UsageError(e.to_string()))
            .context("invalid experiment")
    }
}
