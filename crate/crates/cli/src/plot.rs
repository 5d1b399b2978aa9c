//! Minimal SVG 1.1 chart of one metric against one CSV column.

use std::fmt::Write as _;

use anyhow::{bail, Result};

use crate::records::TrialRecord;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum XColumn {
    N,
    D,
    K,
    Eta,
    #[value(name = "T")]
    T,
    Trial,
}

impl XColumn {
    fn name(self) -> &'static str {
        match self {
            XColumn::N => "n",
            XColumn::D => "d",
            XColumn::K => "k",
            XColumn::Eta => "eta",
            XColumn::T => "T",
            XColumn::Trial => "trial",
        }
    }

    fn get(self, r: &TrialRecord) -> f64 {
        match self {
            XColumn::N => r.n as f64,
            XColumn::D => r.d as f64,
            XColumn::K => r.k as f64,
            XColumn::Eta => r.eta,
            XColumn::T => r.t as f64,
            XColumn::Trial => r.trial as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub metric: String,
    pub x: XColumn,
    pub log_log: bool,
}

fn available(records: &[TrialRecord]) -> Vec<&str> {
    let mut m: Vec<&str> = records.iter().map(|r| r.metric.as_str()).collect();
    m.sort_unstable();
    m.dedup();
    m
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn new(vals: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = vals.map(|v| if log { v.log10() } else { v }).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..5)
            .map(|i| {
                let u = i as f64 / 4.0;
                let v = self.lo + u * (self.hi - self.lo);
                (u, tick_label(if self.log { 10f64.powf(v) } else { v }))
            })
            .collect()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Raw values as dots and per-`x` means joined by a line, one colour per
/// experiment in the file.
pub fn render(records: &[TrialRecord], opts: &PlotOptions) -> Result<String> {
    let names = available(records);
    if opts.metric.is_empty() || !names.contains(&opts.metric.as_str()) {
        bail!(
            "metric `{}` not found; available metrics: {}",
            opts.metric,
            if names.is_empty() { "(none)".to_string() } else { names.join(", ") }
        );
    }
    let pts: Vec<(&str, f64, f64)> = records
        .iter()
        .filter(|r| r.metric == opts.metric)
        .map(|r| (r.experiment.as_str(), opts.x.get(r), r.value))
        .collect();
    if opts.log_log && pts.iter().any(|p| p.1 <= 0.0 || p.2 <= 0.0) {
        bail!("log-log axes need positive `{}` and `{}` values", opts.x.name(), opts.metric);
    }
    let sx = Scale::new(pts.iter().map(|p| p.1), opts.log_log);
    let sy = Scale::new(pts.iter().map(|p| p.2), opts.log_log);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |v: f64| LEFT + sx.unit(v) * pw;
    let py = |v: f64| TOP + (1.0 - sy.unit(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (u, label) in sx.ticks() {
        let x = LEFT + u * pw;
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, esc(&label));
    }
    for (u, label) in sy.ticks() {
        let y = TOP + (1.0 - u) * ph;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, esc(&label));
    }
    let scale = if opts.log_log { " (log)" } else { "" };
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{scale}</text>"#, LEFT + pw / 2.0, H - 15.0, opts.x.name());
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}{scale}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(&opts.metric)
    );

    let mut experiments: Vec<&str> = pts.iter().map(|p| p.0).collect();
    experiments.dedup();
    experiments.sort_unstable();
    experiments.dedup();
    for (i, exp) in experiments.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mine: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 == *exp).map(|p| (p.1, p.2)).collect();
        for &(x, y) in &mine {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}" fill-opacity="0.35"/>"#, px(x), py(y));
        }
        let mut xs: Vec<f64> = mine.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let means: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                let ys: Vec<f64> = mine.iter().filter(|p| p.0 == x).map(|p| p.1).collect();
                (x, ys.iter().sum::<f64>() / ys.len() as f64)
            })
            .filter(|p| !opts.log_log || p.1 > 0.0)
            .collect();
        let path: Vec<String> = means.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#, LEFT + 10.0, TOP - 10.0 - 14.0 * i as f64, esc(exp));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, metric: &str, value: f64) -> TrialRecord {
        TrialRecord {
            experiment: "sgd-rate".into(),
            trial: 0,
            seed: 0,
            n,
            d: 1,
            k: 1,
            eta: 0.1,
            t: 10,
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn renders_deterministically() {
        let rs = vec![rec(64, "excess_avg", 0.1), rec(256, "excess_avg", 0.05), rec(64, "excess_avg", 0.12)];
        let o = PlotOptions { metric: "excess_avg".into(), x: XColumn::N, log_log: true };
        let a = render(&rs, &o).unwrap();
        assert_eq!(a, render(&rs, &o).unwrap());
        assert!(a.contains(r#"version="1.1""#));
        assert!(a.contains(">n (log)<") && a.contains(">excess_avg (log)<"));
        assert_eq!(a.matches("<circle").count(), 3);
    }

    #[test]
    fn missing_metric_lists_choices() {
        let rs = vec![rec(64, "excess_avg", 0.1), rec(64, "excess_last", 0.2)];
        let o = PlotOptions { metric: String::new(), x: XColumn::N, log_log: false };
        let e = render(&rs, &o).unwrap_err().to_string();
        assert!(e.contains("excess_avg, excess_last"), "{e}");
        let o = PlotOptions { metric: "excess_avg".into(), x: XColumn::N, log_log: true };
        assert!(render(&[rec(64, "excess_avg", 0.0)], &o).is_err());
    }
}
