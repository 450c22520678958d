//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Consumers pull typed values out with the `take_*` methods and finish with
//! [`FlatConfig::finish`], which rejects any key nobody asked for.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes `key` and parses it, leaving `default` when absent.
    pub fn take_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("key `{key}`: cannot parse {v:?}: {e}"))),
        }
    }

    pub fn take_opt<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("key `{key}`: cannot parse {v:?}: {e}"))),
        }
    }

    /// Errors if any key was left unconsumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.entries.keys().map(String::as_str).collect();
            Err(Error::Config(format!("unknown keys: {}", keys.join(", "))))
        }
    }

    /// Serializes back to `key = value` lines in key order.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_take() {
        let mut c = FlatConfig::parse("# header\nwidth = 128\n alpha=0.8 # trailing\n\nmode = eye_only\n").unwrap();
        assert_eq!(c.take_or("width", 0usize).unwrap(), 128);
        assert_eq!(c.take_or("alpha", 0.0f64).unwrap(), 0.8);
        assert_eq!(c.take_or("missing", 3u8).unwrap(), 3);
        assert_eq!(c.take_opt::<String>("mode").unwrap().as_deref(), Some("eye_only"));
        c.finish().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let c = FlatConfig::parse("widht = 3").unwrap();
        let err = c.finish().unwrap_err().to_string();
        assert!(err.contains("widht"));
    }

    #[test]
    fn malformed_lines() {
        assert!(FlatConfig::parse("novalue").is_err());
        assert!(FlatConfig::parse("a = 1\na = 2").is_err());
        let mut c = FlatConfig::parse("a = x").unwrap();
        assert!(c.take_or("a", 1.0f64).is_err());
    }
}
