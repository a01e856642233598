use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

/// Resolved values for one run: explicit flag, else config-file entry, else
/// default. Every resolved value is recorded for the manifest.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    /// Reads `key=value` lines; `#` starts a comment. Keys are long flag
    /// names with or without leading dashes; `_` and `-` are interchangeable.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config file {}: {e}", path.display())))?;
        let mut file = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
            let key = normalize(k);
            if file.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Failure::usage(format!("{}:{}: duplicate key {key}", path.display(), n + 1)));
            }
        }
        Ok(Self { file, resolved: Vec::new() })
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        match self.file.remove(key) {
            Some(raw) => {
                raw.parse().map(Some).map_err(|e| Failure::usage(format!("config file: invalid {key}={raw}: {e}")))
            }
            None => Ok(None),
        }
    }

    /// Flag value, else file value, else `default`.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        let file = self.from_file(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Like [`Settings::get`] without a default.
    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        let file = self.from_file(key)?;
        let v = flag.or(file);
        if let Some(v) = &v {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(v)
    }

    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T, Failure>
    where
        T::Err: Display,
    {
        self.get_opt(key, flag)?.ok_or_else(|| Failure::usage(format!("missing required --{key}")))
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> Result<bool, Failure> {
        let v = flag || self.from_file::<bool>(key)?.unwrap_or(false);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Fails on config-file keys the command did not consume.
    pub fn finish(&self) -> Result<(), Failure> {
        match self.file.keys().next() {
            Some(k) => Err(Failure::usage(format!("config file: unknown key {k:?} for this command"))),
            None => Ok(()),
        }
    }

    pub fn resolved(&self) -> &[(String, String)] {
        &self.resolved
    }
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches('-').replace('_', "-")
}
