use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use scosep::optimizers::Schedule;
use scosep::verify::{self, Verdict, VerifyOptions, ORACLE_IDS};
use scosep_cli::config::{parse_number, ConfigFile};
use scosep_cli::experiments::{self, Axis, ExperimentId, ExperimentSpec};
use scosep_cli::plot::{self, PlotOptions, XColumn};
use scosep_cli::records::{self, MetricSummary};
use scosep_cli::{to_json, write_outputs};

#[derive(Parser)]
#[command(name = "scosep", version, about = "Run separation experiments and lemma oracles")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment: CSV of trial records plus a summary JSON.
    Run {
        /// Experiment id; may instead come from the config file.
        experiment: Option<ExperimentId>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment once per value of one parameter.
    Sweep {
        experiment: Option<ExperimentId>,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; fractions like 1/64 are accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_number, required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run lemma oracles (`all` or a list of ids).
    Verify {
        ids: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON report path; printed after the table when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Chart one metric of a results CSV as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = "")]
        metric: String,
        #[arg(long, value_enum, default_value = "n")]
        x: XColumn,
        #[arg(long)]
        log_log: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_number)]
    eta: Option<f64>,
    #[arg(long = "T")]
    t: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV path; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    schedule: Option<Schedule>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Monte Carlo draws per population estimate.
    #[arg(long)]
    mc: Option<usize>,
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::InvalidValue, msg).exit()
}

fn set_workers(workers: Option<usize>) -> Result<()> {
    if let Some(w) = workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    Ok(())
}

struct Resolved {
    spec: ExperimentSpec,
    out: PathBuf,
    workers: Option<usize>,
}

fn merge(experiment: Option<ExperimentId>, c: Common) -> Result<Resolved> {
    let file = match &c.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let id = match experiment {
        Some(id) => id,
        None => match file.values.get("experiment") {
            Some(s) => s.parse().unwrap_or_else(|e| usage_error(e)),
            None => usage_error("an experiment id is required"),
        },
    };
    let eta = match (c.eta, file.values.get("eta")) {
        (Some(e), _) => Some(e),
        (None, Some(s)) => Some(parse_number(s).map_err(anyhow::Error::msg).context("config key `eta`")?),
        (None, None) => None,
    };
    let schedule = match c.schedule {
        Some(s) => Some(s),
        None => file.get::<Schedule>("schedule")?,
    };
    let spec = ExperimentSpec {
        id,
        n: c.n.or(file.get("n")?),
        d: c.d.or(file.get("d")?),
        k: c.k.or(file.get("k")?),
        eta,
        t: c.t.or(file.get("T")?),
        trials: c.trials.or(file.get("trials")?),
        seed: c.seed.or(file.get("seed")?).unwrap_or(0),
        schedule,
        mc: c.mc.or(file.get("mc")?),
    };
    let out = c
        .out
        .or(file.get("out")?)
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", id.as_str())));
    Ok(Resolved { spec, out, workers: c.workers.or(file.get("workers")?) })
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn metrics_table(metrics: &[MetricSummary]) -> String {
    let mut s = format!("{:<22} {:>12} {:>8} {:>14} {:>12}\n", "metric", "eta", "T", "mean", "stderr");
    for m in metrics {
        s += &format!("{:<22} {:>12.4e} {:>8} {:>14.6} {:>12.6}\n", m.metric, m.eta, m.t, m.mean, m.stderr);
    }
    s
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run { experiment, common } => {
            let r = merge(experiment, common)?;
            if let Err(e) = r.spec.resolve() {
                usage_error(format!("{e:#}"));
            }
            set_workers(r.workers)?;
            let out = experiments::run(&r.spec)?;
            let json = write_outputs(&r.out, &out.records, &out.summary)?;
            let mut text = metrics_table(&out.summary.metrics);
            for c in &out.summary.checks {
                text += &format!("check {}: {} ({} vs {})\n", c.name, if c.holds { "holds" } else { "violated" }, c.value, c.threshold);
            }
            emit(&text)?;
            eprintln!("wrote {} and {}", r.out.display(), json.display());
        }
        Cmd::Sweep { experiment, axis, values, common } => {
            let r = merge(experiment, common)?;
            if let Err(e) = r.spec.resolve() {
                usage_error(format!("{e:#}"));
            }
            set_workers(r.workers)?;
            let out = match experiments::sweep(&r.spec, axis, &values) {
                Ok(o) => o,
                Err(e) => usage_error(format!("{e:#}")),
            };
            let json = write_outputs(&r.out, &out.records, &out.summary)?;
            let mut text = String::new();
            for (v, m) in values.iter().zip(&out.summary.means) {
                text += &format!("{v:>12} {m:>14.6}\n");
            }
            text += &match out.summary.loglog_slope {
                Some(s) => format!("log-log slope of {}: {s:.4}\n", out.summary.metric),
                None => format!("log-log slope of {}: undefined\n", out.summary.metric),
            };
            emit(&text)?;
            eprintln!("wrote {} and {}", r.out.display(), json.display());
        }
        Cmd::Verify { ids, seed, out, workers, config } => {
            let file = match &config {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::default(),
            };
            set_workers(workers.or(file.get("workers")?))?;
            let opts = VerifyOptions { seed: seed.or(file.get("seed")?).unwrap_or(0), ..VerifyOptions::default() };
            let selected: Vec<&str> = if ids.is_empty() || ids.iter().any(|i| i == "all") {
                ORACLE_IDS.to_vec()
            } else {
                ids.iter().map(String::as_str).collect()
            };
            if let Some(bad) = selected.iter().find(|i| !ORACLE_IDS.contains(i)) {
                usage_error(format!("unknown oracle `{bad}`; known: all, {}", ORACLE_IDS.join(", ")));
            }
            let mut reports = Vec::new();
            for id in selected {
                reports.extend(verify::run_oracle(id, &opts)?);
            }
            emit(&verify::format_table(&reports))?;
            let json = to_json(&reports)?;
            match out {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => emit(&json)?,
            }
            if reports.iter().any(|r| r.verdict == Verdict::Fail) {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Plot { csv, metric, x, log_log, out } => {
            let file = std::fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let recs = records::read_csv(std::io::BufReader::new(file)).with_context(|| format!("parsing {}", csv.display()))?;
            let svg = plot::render(&recs, &PlotOptions { metric, x, log_log })?;
            std::fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
