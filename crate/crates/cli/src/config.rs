//! Flat `key=value` run configuration. Command-line flags win over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::UsageError;

pub const KEYS: [&str; 7] = ["scorer", "m", "seed", "surrogate", "transform", "out", "inclusion_prob"];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("{source}:{}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(UsageError(format!(
                    "{source}:{}: unknown key `{k}` (valid: {})",
                    n + 1,
                    KEYS.join(", ")
                )));
            }
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| UsageError(format!("config key `{key}`: `{v}`: {e}")))
            })
            .transpose()
    }

    /// `flag` if given, otherwise the file's value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf, UsageError> {
        Ok(self.pick(flag, "out")?.unwrap_or_else(|| PathBuf::from(".")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let cfg = FileConfig::parse("# run\nm = 64\nseed=3\nscorer=builtin:hue_gate:k=1,h0=90\n", "c").unwrap();
        assert_eq!(cfg.pick::<usize>(None, "m").unwrap(), Some(64));
        assert_eq!(cfg.pick(Some(10usize), "m").unwrap(), Some(10));
        assert_eq!(cfg.pick::<u64>(None, "seed").unwrap(), Some(3));
        assert_eq!(
            cfg.get::<String>("scorer").unwrap().as_deref(),
            Some("builtin:hue_gate:k=1,h0=90")
        );
        assert_eq!(cfg.get::<String>("surrogate").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = FileConfig::parse("m=1\ncolour=red\n", "c").unwrap_err();
        assert!(err.0.starts_with("c:2:"), "{}", err.0);
        assert!(FileConfig::parse("just words\n", "c").is_err());
        let cfg = FileConfig::parse("m=many\n", "c").unwrap();
        assert!(cfg.get::<usize>("m").is_err());
    }
}
