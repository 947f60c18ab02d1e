//! Flat key-value configuration files.
//!
//! The format is one `key = value` pair per line; blank lines and `#`
//! comments are ignored. Every CLI flag overrides its config key. Keys are
//! namespaced with dots (`gnn.lr`, `real.edges`); see the README for the
//! full schema.

use std::collections::BTreeMap;
use std::path::Path;

use super::HarnessError;

/// Parsed configuration: an ordered key-value map with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::File {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_str_source(&text, &path.display().to_string())
    }

    pub fn from_str_source(text: &str, source: &str) -> Result<Self, HarnessError> {
        let mut values = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                context: format!("{source}:{}", idx + 1),
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(HarnessError::Config {
                    context: format!("{source}:{}", idx + 1),
                    message: "empty key".into(),
                });
            }
            values.insert(key.to_string(), value.to_string());
        }
        Ok(RawConfig { values })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, raw: &str) -> Result<T, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        raw.parse().map_err(|e| HarnessError::Config {
            context: format!("key '{key}'"),
            message: format!("cannot parse '{raw}': {e}"),
        })
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, HarnessError> {
        match self.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, HarnessError> {
        match self.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, HarnessError> {
        match self.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, HarnessError> {
        match self.get(key) {
            Some("true") | Some("1") | Some("yes") | Some("on") => Ok(true),
            Some("false") | Some("0") | Some("no") | Some("off") => Ok(false),
            Some(other) => Err(HarnessError::Config {
                context: format!("key '{key}'"),
                message: format!("cannot parse '{other}' as bool"),
            }),
            None => Ok(default),
        }
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn get_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, HarnessError> {
        match self.get(key) {
            Some(raw) => raw
                .split(',')
                .map(|item| self.parse(key, item.trim()))
                .collect(),
            None => Ok(default.to_vec()),
        }
    }

    pub fn get_usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, HarnessError> {
        match self.get(key) {
            Some(raw) => raw
                .split(',')
                .map(|item| self.parse(key, item.trim()))
                .collect(),
            None => Ok(default.to_vec()),
        }
    }

    pub fn get_str_list(&self, key: &str, default: &[&str]) -> Vec<String> {
        match self.get(key) {
            Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
            None => default.iter().map(|s| s.to_string()).collect(),
        }
    }
}
