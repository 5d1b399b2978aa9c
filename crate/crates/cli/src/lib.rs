//! Experiment runner behind the `scosep` binary.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod records;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// `results.csv` → `results.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_outputs<T: Serialize>(csv_path: &Path, records: &[records::TrialRecord], summary: &T) -> Result<PathBuf> {
    let file = std::fs::File::create(csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    records::write_csv(records, std::io::BufWriter::new(file))?;
    let json = summary_path(csv_path);
    std::fs::write(&json, to_json(summary)?).with_context(|| format!("writing {}", json.display()))?;
    Ok(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_sits_next_to_the_csv() {
        assert_eq!(summary_path(Path::new("out/r.csv")), PathBuf::from("out/r.summary.json"));
        assert_eq!(summary_path(Path::new("r")), PathBuf::from("r.summary.json"));
    }
}
