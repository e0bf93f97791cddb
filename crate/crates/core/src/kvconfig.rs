//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("invalid value for `{key}`: {value:?} ({detail})")]
    Value { key: String, value: String, detail: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

/// Ordered key/value map. Later assignments override earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn overlay(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Parses `key` into `slot` if present.
    pub fn read_into<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: Display,
    {
        if let Some(v) = self.get(key) {
            *slot = v.parse().map_err(|e: T::Err| ConfigError::Value {
                key: key.to_string(),
                value: v.to_string(),
                detail: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Comma-separated list form of [`KvConfig::read_into`].
    pub fn read_list<T: FromStr>(&self, key: &str, slot: &mut Vec<T>) -> Result<(), ConfigError>
    where
        T::Err: Display,
    {
        if let Some(v) = self.get(key) {
            *slot = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|e: T::Err| ConfigError::Value {
                        key: key.to_string(),
                        value: v.to_string(),
                        detail: e.to_string(),
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }

    /// Fails on the first key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
