//! Plain-text `key = value` defaults, overridden by flags.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::error::{usage, Result};

/// Keys are long flag names without the dashes; `#` starts a comment line.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().to_owned();
            if key.is_empty() {
                return Err(usage(format!("config line {}: empty key", i + 1)));
            }
            if values.insert(key.clone(), v.trim().to_owned()).is_some() {
                return Err(usage(format!("config line {}: duplicate key {key:?}", i + 1)));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Resolves each parameter as flag, then config file, then built-in default,
/// and rejects config keys that no parameter asked for.
pub struct Settings<'a> {
    file: Option<&'a ConfigFile>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Settings<'a> {
    pub fn new(file: Option<&'a ConfigFile>) -> Self {
        Settings {
            file,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.used.borrow_mut().insert(key.to_owned());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.and_then(|f| f.values.get(key)) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| usage(format!("config key {key}: invalid value {v:?}: {e}"))),
        }
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(flag, key)?.ok_or_else(|| usage(format!("missing --{key}")))
    }

    /// Fails on config keys no parameter consumed.
    pub fn finish(&self) -> Result<()> {
        let Some(file) = self.file else { return Ok(()) };
        let used = self.used.borrow();
        let unknown: Vec<&str> = file.values.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

/// Comma-separated list flag, e.g. `--n 256,1024`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let items = s
            .split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<std::result::Result<Vec<T>, String>>()?;
        if items.is_empty() {
            return Err("empty list".to_owned());
        }
        Ok(List(items))
    }
}
