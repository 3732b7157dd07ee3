//! Flat `key = value` settings from an INI file; command-line flags win.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use ini::Ini;

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: HashMap<String, String>,
}

impl Settings {
    /// Reads every property of every section into one flat map. Keys are
    /// normalized to lower case with `-` read as `_`.
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                values.insert(normalize_key(k), v.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    #[cfg(test)]
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self { values: pairs.into_iter().map(|(k, v)| (normalize_key(k), v.to_string())).collect() }
    }

    /// The flag value when given, else the config value parsed as `T`.
    pub fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| anyhow!("config key {key} = {raw:?}: {e}")),
        }
    }

    pub fn get_or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key, flag)?.ok_or_else(|| anyhow!("missing required setting --{} (or `{key}` in the config file)", key.replace('_', "-")))
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}
