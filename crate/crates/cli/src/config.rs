//! Flat `key = value` run configuration.
//!
//! Values are resolved in three layers: the command's defaults, then an
//! optional config file, then command-line flags. Keys outside the command's
//! schema are rejected at every layer.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use pulearn::csv::Metadata;

/// Ordered `(key, default)` pairs accepted by one subcommand.
pub type Schema<'a> = &'a [(&'static str, &'static str)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    command: &'static str,
    entries: Vec<(&'static str, String)>,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// a `#` after a value starts a trailing comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{}`", i + 1, raw.trim()))?;
        let k = k.trim();
        if k.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `key=value` flag argument.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    pub fn new(command: &'static str, schema: Schema) -> Self {
        Self {
            command,
            entries: schema.iter().map(|&(k, v)| (k, v.to_string())).collect(),
        }
    }

    pub fn command(&self) -> &str {
        self.command
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let slot = self
            .entries
            .iter_mut()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| anyhow!("unknown config key `{key}` for `{}`", self.command))?;
        slot.1 = value.into();
        Ok(())
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl ToString>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v.to_string()),
            None => Ok(()),
        }
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.merge_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn raw(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("`{key}` is not in the `{}` schema", self.command))
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}"))
    }

    /// `None` when the value is `auto`.
    pub fn get_auto<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// Optional path; empty means unset.
    pub fn path(&self, key: &str) -> Option<&Path> {
        let raw = self.raw(key);
        (!raw.is_empty()).then(|| Path::new(raw))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => bail!("config key `{key}`: expected true/false, got `{other}`"),
        }
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse()
                    .map_err(|e| anyhow!("config key `{key}`: cannot parse `{s}`: {e}"))
            })
            .collect()
    }

    /// Every key with its resolved value, for output headers.
    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.push("command", self.command);
        for (k, v) in &self.entries {
            m.push(*k, v);
        }
        m
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: Schema<'static> = &[
        ("epochs", "100"),
        ("loss", "sigmoid"),
        ("grid", "0.8,1.0"),
        ("path", ""),
    ];

    #[test]
    fn layers_override_in_order() {
        let mut c = RunConfig::new("t", SCHEMA);
        c.merge_text("# comment\n\nepochs = 5  # trailing\nloss=logistic\n")
            .unwrap();
        c.set("epochs", "7").unwrap();
        assert_eq!(c.get::<usize>("epochs").unwrap(), 7);
        assert_eq!(c.raw("loss"), "logistic");
        assert_eq!(c.list::<f64>("grid").unwrap(), vec![0.8, 1.0]);
        assert!(c.path("path").is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut c = RunConfig::new("t", SCHEMA);
        assert!(c.merge_text("epoch = 5").is_err());
        assert!(c.set("nope", "1").is_err());
        assert!(c.merge_text("no equals sign").is_err());
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut c = RunConfig::new("t", SCHEMA);
        c.set("epochs", "ten").unwrap();
        let msg = c.get::<usize>("epochs").unwrap_err().to_string();
        assert!(msg.contains("epochs"), "{msg}");
    }

    #[test]
    fn metadata_echoes_everything() {
        let c = RunConfig::new("t", SCHEMA);
        let text = c.metadata().render();
        assert!(text.starts_with("# command = t\n# epochs = 100\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn assignment_flag() {
        assert_eq!(
            parse_assignment("beta = 0.1").unwrap(),
            ("beta".to_string(), "0.1".to_string())
        );
        assert!(parse_assignment("beta").is_err());
    }
}
