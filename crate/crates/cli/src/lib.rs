//! Experiment harness: graph generation specs, metric records, sweep
//! execution, and the key=value config file the CLI layers under its flags.

pub mod experiment;

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config line {line}: {text:?}")]
    Malformed { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// key=value file, '#' comments; later entries win. CLI flags override
/// whatever the file says.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: lineno + 1, text: raw.to_string() });
            };
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn get_u32(&self, key: &str) -> Option<u32> {
        self.entries.get(key).and_then(|v| v.parse().ok())
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.entries.get(key).and_then(|v| v.parse().ok())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.entries.get(key).and_then(|v| v.parse().ok())
    }

    pub fn get_usize(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|v| v.parse().ok())
    }
}

/// Strips every `wall_time_ms` field so reruns can be compared byte for
/// byte; wall time is measured but never part of any determinism check.
pub fn strip_wall_time(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("wall_time_ms");
            for v in map.values_mut() {
                strip_wall_time(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_wall_time(v);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let cfg = ConfigFile::parse("# comment\nphase-constant = 6\nln-const=0.5\n").unwrap();
        assert_eq!(cfg.get_u32("phase-constant"), Some(6));
        assert_eq!(cfg.get_f64("ln-const"), Some(0.5));
        assert!(ConfigFile::parse("nonsense\n").is_err());
    }

    #[test]
    fn wall_time_stripping() {
        let mut v = serde_json::json!({
            "a": 1, "wall_time_ms": 5.0,
            "nested": [{"wall_time_ms": 2, "keep": true}]
        });
        strip_wall_time(&mut v);
        assert_eq!(v, serde_json::json!({"a": 1, "nested": [{"keep": true}]}));
    }
}
