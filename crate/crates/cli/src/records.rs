//! Trial records, their CSV form, and per-metric summaries.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use serde::Serialize;

pub const CSV_HEADER: [&str; 10] = ["experiment", "trial", "seed", "n", "d", "k", "eta", "T", "metric", "value"];

/// Every metric name an experiment may emit.
pub const METRICS: [&str; 27] = [
    "excess_avg",
    "excess_last",
    "sum_z",
    "bad_dataset",
    "last_bound_holds",
    "avg_bound_holds",
    "excess",
    "final_w",
    "trapped",
    "trapped_excess",
    "sgd_final_w",
    "sgd_reached",
    "gd_large_final_w",
    "gd_large_reached",
    "gd_excess",
    "sgd_excess",
    "selected_excess",
    "u_traversal_err",
    "u_traversal_ok",
    "special_found",
    "erm_empirical",
    "erm_excess",
    "rerm_min_excess",
    "rerm_separated",
    "rerm_lambda_pass_frac",
    "sgd_found_excess",
    "pass_count",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: String,
    pub trial: u64,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub eta: f64,
    pub t: u64,
    pub metric: String,
    pub value: f64,
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.k.to_string(),
            r.eta.to_string(),
            r.t.to_string(),
            r.metric.clone(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = &rec[i];
    raw.parse()
        .map_err(|_| anyhow::anyhow!("line {line}: column `{}` has invalid value `{raw}`", CSV_HEADER[i]))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut out = Vec::new();
    let mut header_seen = false;
    for rec in r.records() {
        let rec = rec.context("malformed CSV")?;
        let line = rec.position().map_or(0, |p| p.line());
        if !header_seen {
            if rec.iter().ne(CSV_HEADER.iter().copied()) {
                bail!("line {line}: header must be `{}`", CSV_HEADER.join(","));
            }
            header_seen = true;
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            bail!("line {line}: expected {} fields, found {}", CSV_HEADER.len(), rec.len());
        }
        out.push(TrialRecord {
            experiment: rec[0].to_string(),
            trial: field(&rec, 1, line)?,
            seed: field(&rec, 2, line)?,
            n: field(&rec, 3, line)?,
            d: field(&rec, 4, line)?,
            k: field(&rec, 5, line)?,
            eta: field(&rec, 6, line)?,
            t: field(&rec, 7, line)?,
            metric: rec[8].to_string(),
            value: field(&rec, 9, line)?,
        });
    }
    if !header_seen {
        bail!("line 1: empty CSV, expected header `{}`", CSV_HEADER.join(","));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: String,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t: u64,
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error per `(metric, eta, T)`, in order of first
/// appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<MetricSummary> {
    let mut groups: Vec<(String, f64, u64, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|g| g.0 == r.metric && g.1.to_bits() == r.eta.to_bits() && g.2 == r.t) {
            Some(g) => g.3.push(r.value),
            None => groups.push((r.metric.clone(), r.eta, r.t, vec![r.value])),
        }
    }
    groups
        .into_iter()
        .map(|(metric, eta, t, vals)| {
            let (mean, stderr) = mean_stderr(&vals);
            MetricSummary {
                metric,
                eta,
                t,
                count: vals.len(),
                mean,
                stderr,
            }
        })
        .collect()
}

pub fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let m = vals.len() as f64;
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let mean = vals.iter().sum::<f64>() / m;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`; `None` unless every pair
/// is positive and at least two distinct `x` exist.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(metric: &str, value: f64) -> TrialRecord {
        TrialRecord {
            experiment: "sgd-rate".into(),
            trial: 0,
            seed: 1,
            n: 64,
            d: 1,
            k: 1,
            eta: 0.125,
            t: 64,
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![rec("excess_avg", 0.25), rec("excess_last", 1e-9)];
        let mut buf = Vec::new();
        write_csv(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("experiment,trial,seed,n,d,k,eta,T,metric,value\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rs);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "experiment,trial,seed,n,d,k,eta,T,metric,value\nx,0,1,2,3,4,0.5,9,m,1\nx,0,1,2,3,4,zz,9,m,1\n";
        let e = read_csv(bad.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("eta"), "{e}");
        let short = "experiment,trial,seed,n,d,k,eta,T,metric,value\nx,0,1\n";
        assert!(read_csv(short.as_bytes()).unwrap_err().to_string().contains("line 2"));
        assert!(read_csv("a,b\n".as_bytes()).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn summaries_and_slopes() {
        let s = summarize(&[rec("a", 1.0), rec("b", 5.0), rec("a", 3.0)]);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].mean, s[0].count), (2.0, 2));
        assert!((s[0].stderr - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [1.0, 4.0, 16.0].iter().map(|&x: &f64| (x, 3.0 / x.sqrt())).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]), None);
    }
}
