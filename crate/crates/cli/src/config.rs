//! Flat `key=value` config files merged under command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::CliError;

/// Resolves each setting from its flag, then the config file, then a default,
/// and records the effective value for the report.
pub struct Settings {
    file: BTreeMap<String, String>,
    source: Option<PathBuf>,
    used: BTreeSet<String>,
    effective: Map<String, Value>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
pub fn parse_config(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{origin}:{}: expected key=value, got `{line}`", n + 1))
        })?;
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(CliError::Usage(format!("{origin}:{}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("{origin}:{}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings {
            file,
            source: path.map(Path::to_path_buf),
            used: BTreeSet::new(),
            effective: Map::new(),
        })
    }

    fn file_value<T>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                let src = self.source.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                CliError::Usage(format!("{src}: bad value `{raw}` for `{key}`: {e}"))
            }),
        }
    }

    /// Setting echoed into the report.
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Into<Value> + Clone,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                v
            }
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.effective.insert(key.to_string(), v.clone().into());
        Ok(v)
    }

    /// Like [`Settings::value`] but echoed through its `Display` form.
    pub fn display_value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                v
            }
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.effective.insert(key.to_string(), Value::String(v.to_string()));
        Ok(v)
    }

    /// A file-system location. Paths are not echoed so that reports do not
    /// depend on where they were written.
    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        match flag {
            Some(p) => {
                self.used.insert(key.to_string());
                Ok(Some(p))
            }
            None => self.file_value::<PathBuf>(key),
        }
    }

    pub fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        self.path(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting --{key}")))
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let from_file = self.file_value::<bool>(key)?.unwrap_or(false);
        let v = flag || from_file;
        self.effective.insert(key.to_string(), Value::Bool(v));
        Ok(v)
    }

    /// Rejects config-file keys that no setting consumed.
    pub fn finish(self) -> Result<Map<String, Value>, CliError> {
        if let Some(k) = self.file.keys().find(|k| !self.used.contains(*k)) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        Ok(self.effective)
    }
}
