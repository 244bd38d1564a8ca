//! Flat `key = value` configuration with `[section]` headers.
//!
//! Lines starting with `#` and blank lines are ignored. CLI flags are
//! applied on top via [`Config::set`], so flags always win over the file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{origin}:{}: expected `key = value` or `[section]`, got {line:?}",
                    ln + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {path:?}: {e}")))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Override a value (CLI flags land here, after the file is parsed).
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    pub fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CliError::usage(format!("[{section}] {key} = {v:?} is not a number"))
            }),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CliError::usage(format!("[{section}] {key} = {v:?} is not an integer"))
            }),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CliError::usage(format!("[{section}] {key} = {v:?} is not an integer"))
            }),
        }
    }

    pub fn get_bool(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("on") | Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("off") | Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(CliError::usage(format!(
                "[{section}] {key} = {v:?} is not on/off"
            ))),
        }
    }

    /// Comma-separated list values.
    pub fn get_list(&self, section: &str, key: &str, default: &str) -> Vec<String> {
        self.get(section, key)
            .unwrap_or(default)
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_overrides() {
        let text = "\n# top comment\n[corpus]\nn_bonafide = 50\nseed=7\n\n[train]\nepochs = 12\n";
        let mut cfg = Config::parse(text, "test").unwrap();
        assert_eq!(cfg.get("corpus", "n_bonafide"), Some("50"));
        assert_eq!(cfg.get_u64("corpus", "seed", 0).unwrap(), 7);
        assert_eq!(cfg.get_usize("train", "epochs", 30).unwrap(), 12);
        assert_eq!(cfg.get_usize("train", "batch_size", 64).unwrap(), 64);
        cfg.set("train", "epochs", "3");
        assert_eq!(cfg.get_usize("train", "epochs", 30).unwrap(), 3);
    }

    #[test]
    fn rejects_junk_lines_and_bad_numbers() {
        assert!(Config::parse("what is this", "test").is_err());
        let cfg = Config::parse("[a]\nx = abc\n", "test").unwrap();
        assert!(cfg.get_f64("a", "x", 0.0).is_err());
        assert!(cfg.get_bool("a", "x", false).is_err());
    }

    #[test]
    fn lists_split_on_commas() {
        let cfg = Config::parse("[sweep]\nseeds = 1, 10,100\n", "test").unwrap();
        assert_eq!(cfg.get_list("sweep", "seeds", ""), vec!["1", "10", "100"]);
        assert_eq!(cfg.get_list("sweep", "codecs", "clean"), vec!["clean"]);
    }
}
