//! Config layering, hashing and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Defaults, then the config file, then command-line overrides.
pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&Path>,
    overrides: Map<String, Value>,
) -> Result<T> {
    let mut merged = serde_json::to_value(defaults)?;
    if let Some(path) = file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let layer: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let Value::Object(layer) = layer else {
            bail!("config file {} must hold a JSON object", path.display());
        };
        overlay(&mut merged, layer);
    }
    overlay(&mut merged, overrides);
    serde_json::from_value(merged).context("resolving configuration")
}

fn overlay(base: &mut Value, layer: Map<String, Value>) {
    if let Value::Object(target) = base {
        for (k, v) in layer {
            target.insert(k, v);
        }
    }
}

/// Collects `Some` command-line values under their config keys.
#[derive(Default)]
pub struct Overrides(Map<String, Value>);

impl Overrides {
    pub fn set<V: Serialize>(&mut self, key: &str, value: Option<V>) -> &mut Self {
        if let Some(v) = value {
            self.0.insert(key.to_string(), serde_json::to_value(v).expect("plain values serialize"));
        }
        self
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }
}

/// SHA-256 of the canonical JSON form. Object keys are sorted, so the hash
/// does not depend on the key order of the input.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&canonicalize(value))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub margin: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub suites: Vec<SuiteSummary>,
    pub config: Value,
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, config: &T, master_seed: u64) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config_hash: config_hash(config)?,
            master_seed,
            started_unix: unix_seconds(),
            finished_unix: f64::NAN,
            outputs: Vec::new(),
            suites: Vec::new(),
            config: serde_json::to_value(config)?,
        })
    }

    /// Writes `{stem}_manifest.json` into `dir` and returns its path.
    pub fn finish(mut self, dir: &Path, stem: &str) -> Result<PathBuf> {
        self.finished_unix = unix_seconds();
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}_manifest.json"));
        self.outputs.push(path.clone());
        fs::write(&path, serde_json::to_vec_pretty(&self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Demo {
        a: u32,
        b: Vec<f64>,
        c: String,
    }

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        fs::write(&file, r#"{"a": 5, "c": "file"}"#).unwrap();
        let defaults = Demo { a: 1, b: vec![1.0], c: "default".into() };
        let mut o = Overrides::default();
        o.set("c", Some("cli")).set::<u32>("a", None);
        let resolved: Demo = resolve(&defaults, Some(&file), o.into_map()).unwrap();
        assert_eq!(resolved, Demo { a: 5, b: vec![1.0], c: "cli".into() });
    }

    #[test]
    fn hash_ignores_key_order() {
        let x: Value = serde_json::from_str(r#"{"a": 1, "b": {"y": 2, "x": [1, 2]}}"#).unwrap();
        let y: Value = serde_json::from_str(r#"{"b": {"x": [1, 2], "y": 2}, "a": 1}"#).unwrap();
        assert_eq!(config_hash(&x).unwrap(), config_hash(&y).unwrap());
        let z: Value = serde_json::from_str(r#"{"a": 2, "b": {"x": [1, 2], "y": 2}}"#).unwrap();
        assert_ne!(config_hash(&x).unwrap(), config_hash(&z).unwrap());
    }
}
