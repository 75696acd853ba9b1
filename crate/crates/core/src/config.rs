//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted
//! (`match.hp_max`, `trainer.gamma`, `match.combo.3.damage`). Every key must be
//! consumed by some typed loader; leftovers are reported as unknown keys with
//! the line they came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Where a value came from. Line 0 is used for command-line overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => f.write_str("--set override"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: malformed line `{text}` (expected `key = value`)")]
    Syntax { origin: Origin, text: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        origin: Origin,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
    used: bool,
}

/// Parsed flat config with consumption tracking.
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    entries: BTreeMap<String, Entry>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = FlatConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::Line(idx + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin,
                text: raw.trim().to_string(),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    origin,
                    text: raw.trim().to_string(),
                });
            }
            cfg.insert(key, value.trim(), origin);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn insert(&mut self, key: &str, value: &str, origin: Origin) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin,
                used: false,
            },
        );
    }

    /// Applies a `key=value` override on top of the file contents.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax {
                origin: Origin::Override,
                text: assignment.to_string(),
            })?;
        self.insert(key.trim(), value.trim(), Origin::Override);
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Marks all keys under `prefix` as consumed (used for metadata blocks such as `run.*`).
    pub fn ignore_prefix(&mut self, prefix: &str) {
        for (k, e) in self.entries.iter_mut() {
            if k.starts_with(prefix) {
                e.used = true;
            }
        }
    }

    pub fn get_raw(&mut self, key: &str) -> Option<(String, Origin)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.origin)
        })
    }

    /// Reads and parses `key`, leaving `slot` untouched when the key is absent.
    pub fn read<T>(&mut self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if let Some((value, origin)) = self.get_raw(key) {
            *slot = value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                origin,
                key: key.to_string(),
                value: value.clone(),
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Like [`FlatConfig::read`] with a custom parser.
    pub fn read_with<T>(
        &mut self,
        key: &str,
        slot: &mut T,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<(), ConfigError> {
        if let Some((value, origin)) = self.get_raw(key) {
            *slot = parse(&value).map_err(|reason| ConfigError::InvalidValue {
                origin,
                key: key.to_string(),
                value: value.clone(),
                reason,
            })?;
        }
        Ok(())
    }

    /// Fails on the first key that no loader consumed.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let mut unknown: Vec<(&String, &Entry)> =
            self.entries.iter().filter(|(_, e)| !e.used).collect();
        unknown.sort_by_key(|(_, e)| match e.origin {
            Origin::Override => usize::MAX,
            Origin::Line(n) => n,
        });
        match unknown.first() {
            Some((key, e)) => Err(ConfigError::UnknownKey {
                origin: e.origin,
                key: (*key).clone(),
            }),
            None => Ok(()),
        }
    }
}

/// Accumulates `key = value` lines for writing configs and manifests.
#[derive(Debug, Default, Clone)]
pub struct FlatWriter {
    lines: Vec<String>,
}

impl FlatWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) {
        self.lines.push(format!("# {text}"));
    }

    pub fn put(&mut self, key: &str, value: impl fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Parses `true/false/1/0/yes/no`.
pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err("expected a boolean".into()),
    }
}

/// Handles the flat config of a whole run: the union of every section.
pub trait FlatSection: Sized {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError>;
    fn write_section(&self, out: &mut FlatWriter);
}
