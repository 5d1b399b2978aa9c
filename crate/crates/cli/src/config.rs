//! Flat `key=value` configuration files. Blank lines and lines starting
//! with `#` are ignored; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const KEYS: [&str; 12] = [
    "experiment", "n", "d", "k", "eta", "T", "trials", "seed", "out", "schedule", "workers", "mc",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected key=value, got `{line}`", i + 1);
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                bail!("config line {}: unknown key `{k}` (known: {})", i + 1, KEYS.join(", "));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                bail!("config line {}: duplicate key `{k}`", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
        }
    }
}

/// Parses `1/64`, `2^-7` and plain decimals, so step sizes can be written
/// as fractions.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
        a / b
    } else if let Some((a, b)) = s.split_once('^') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad base in `{s}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad exponent in `{s}`"))?;
        a.powf(b)
    } else {
        s.parse().map_err(|_| format!("not a number: `{s}`"))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let c = ConfigFile::parse("# demo\nn = 64\n\ntrials=5\neta=1/8\n").unwrap();
        assert_eq!(c.get::<usize>("n").unwrap(), Some(64));
        assert_eq!(c.get::<usize>("k").unwrap(), None);
        assert_eq!(parse_number(&c.values["eta"]).unwrap(), 0.125);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("n 64").unwrap_err().to_string().contains("line 1"));
        assert!(ConfigFile::parse("colour=red").is_err());
        assert!(ConfigFile::parse("n=1\nn=2").is_err());
        assert!(ConfigFile::parse("n=x").unwrap().get::<usize>("n").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("2^-3").unwrap(), 0.125);
        assert_eq!(parse_number("0.5").unwrap(), 0.5);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("abc").is_err());
    }
}
