//! The experiment registry: defaults, per-trial work, and summaries.

use anyhow::{bail, ensure, Result};
use rayon::prelude::*;
use serde::Serialize;

use scosep::distributions::{d_for, make_dataset, n_pow_5_4, DistSpec, Sample};
use scosep::losses::{grid_etas, sum_combine, LossSpec};
use scosep::optimizers::{build_objective, run_gd, run_gd_objective, run_multipass, run_sgd, MultipassConfig, OptConfig, Schedule};
use scosep::population::{excess, pop_drift, pop_fa, pop_kink, pop_nn, PopOptions, PopSpec};
use scosep::rerm::{empirical_risk, find_special_coordinate, separation_certificate, CertificateOptions, SpecialMode, Verdict};
use scosep::rng::trial_seed;
use scosep::{BallSpec, DenseVector};

use crate::records::{loglog_slope, summarize, MetricSummary, TrialRecord, METRICS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum ExperimentId {
    SgdVsRerm,
    GdKinkTrap,
    GdDrift,
    GdVsSgdComposite,
    MultipassGain,
    NnErmFail,
    SgdRate,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::SgdVsRerm,
        ExperimentId::GdKinkTrap,
        ExperimentId::GdDrift,
        ExperimentId::GdVsSgdComposite,
        ExperimentId::MultipassGain,
        ExperimentId::NnErmFail,
        ExperimentId::SgdRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::SgdVsRerm => "sgd-vs-rerm",
            ExperimentId::GdKinkTrap => "gd-kink-trap",
            ExperimentId::GdDrift => "gd-drift",
            ExperimentId::GdVsSgdComposite => "gd-vs-sgd-composite",
            ExperimentId::MultipassGain => "multipass-gain",
            ExperimentId::NnErmFail => "nn-erm-fail",
            ExperimentId::SgdRate => "sgd-rate",
        }
    }

    /// Metric whose mean a sweep fits against the swept axis.
    pub fn primary_metric(self) -> &'static str {
        match self {
            ExperimentId::SgdVsRerm => "rerm_min_excess",
            ExperimentId::GdKinkTrap => "excess",
            ExperimentId::GdDrift => "excess",
            ExperimentId::GdVsSgdComposite => "sgd_excess",
            ExperimentId::MultipassGain => "selected_excess",
            ExperimentId::NnErmFail => "erm_excess",
            ExperimentId::SgdRate => "excess_avg",
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// User-facing parameters; `None` means the experiment's default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub eta: Option<f64>,
    pub t: Option<u64>,
    pub trials: Option<u64>,
    pub seed: u64,
    pub schedule: Option<Schedule>,
    /// Monte Carlo draws per population estimate.
    pub mc: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId) -> Self {
        Self {
            id,
            n: None,
            d: None,
            k: None,
            eta: None,
            t: None,
            trials: None,
            seed: 0,
            schedule: None,
            mc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub id: ExperimentId,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub eta: f64,
    pub t: u64,
    pub trials: u64,
    pub seed: u64,
    pub schedule: Option<Schedule>,
    pub mc: usize,
    /// `(η, T)` pairs run by full-batch GD in the composite experiment.
    pub gd_grid: Vec<(f64, u64)>,
}

pub const DEFAULT_MC: usize = 4000;

fn inv_sqrt(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

impl ExperimentSpec {
    pub fn resolve(&self) -> Result<Resolved> {
        use ExperimentId::*;
        let n = self.n.unwrap_or(match self.id {
            SgdVsRerm | NnErmFail => 12,
            GdKinkTrap => 4096,
            GdDrift | MultipassGain => 64,
            GdVsSgdComposite | SgdRate => 256,
        });
        ensure!(n >= 2, "n must be at least 2, got {n}");
        let d = match (self.d, self.id) {
            (Some(d), _) => d,
            (None, SgdVsRerm | NnErmFail) => d_for(n)?,
            (None, MultipassGain) => 64,
            (None, GdVsSgdComposite) => 4,
            (None, _) => 1,
        };
        ensure!(d >= 1, "d must be at least 1");
        if self.k.is_some() && self.id != MultipassGain {
            bail!("--k only applies to multipass-gain");
        }
        if self.schedule.is_some() && self.id != MultipassGain {
            bail!("--schedule only applies to multipass-gain");
        }
        let k = self.k.unwrap_or(if self.id == MultipassGain { 4 } else { 1 });
        ensure!(k >= 1, "k must be at least 1");
        let schedule = (self.id == MultipassGain).then(|| self.schedule.unwrap_or(Schedule::Fixed));
        let eta = match (self.eta, self.id) {
            (Some(e), _) if self.id != MultipassGain => e,
            (Some(_), _) => bail!("multipass-gain takes its step size from --schedule"),
            (None, GdKinkTrap) => 1.0 / (128.0 * n_pow_5_4(n)),
            (None, MultipassGain) => schedule.unwrap().eta(n, k, 1),
            (None, _) => inv_sqrt(n),
        };
        ensure!(eta.is_finite() && eta > 0.0, "eta must be positive, got {eta}");
        let t = match (self.t, self.id) {
            (Some(_), MultipassGain) => bail!("multipass-gain runs k passes of n/2 steps; --T does not apply"),
            (Some(t), _) => t,
            (None, GdKinkTrap) => 100_000,
            (None, MultipassGain) => (k * (n / 2)) as u64,
            (None, _) => n as u64,
        };
        ensure!(t >= 1, "T must be at least 1");
        if matches!(self.id, SgdRate | SgdVsRerm | NnErmFail) && t > n as u64 {
            bail!("SGD uses one sample per step; T = {t} needs more than n = {n} samples");
        }
        if self.id == MultipassGain {
            ensure!(n % 2 == 0, "multipass-gain needs an even n");
        }
        let trials = self.trials.unwrap_or(match self.id {
            SgdVsRerm | NnErmFail => 100,
            GdKinkTrap | SgdRate => 50,
            GdDrift => 2000,
            GdVsSgdComposite => 20,
            MultipassGain => 30,
        });
        ensure!(trials >= 1, "at least one trial is required");
        let mc = self.mc.unwrap_or(DEFAULT_MC);
        ensure!(mc >= 100, "mc must be at least 100");
        let mut gd_grid = Vec::new();
        let (eta, t) = if self.id == GdVsSgdComposite {
            let etas = match self.eta {
                Some(e) => vec![e],
                None => grid_etas(n).into_iter().step_by(12).collect(),
            };
            let horizons = match self.t {
                Some(t) => vec![t],
                None => vec![(n / 4).max(1) as u64, n as u64, 4 * n as u64],
            };
            for &e in &etas {
                for &h in &horizons {
                    gd_grid.push((e, h));
                }
            }
            (inv_sqrt(n), n as u64)
        } else {
            (eta, t)
        };
        Ok(Resolved {
            id: self.id,
            n,
            d,
            k,
            eta,
            t,
            trials,
            seed: self.seed,
            schedule,
            mc,
            gd_grid,
        })
    }
}

struct Rec {
    metric: &'static str,
    value: f64,
    eta: f64,
    t: u64,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Resolved {
    fn rec(&self, metric: &'static str, value: f64) -> Rec {
        Rec { metric, value, eta: self.eta, t: self.t }
    }

    fn pop_opts(&self, seed: u64) -> PopOptions {
        PopOptions { mc_samples: self.mc, ..PopOptions::with_seed(seed) }
    }
}

/// Starting point for the one-dimensional drift runs. Any positive value
/// works; a dyadic one keeps every iterate exact in binary floating point
/// when η and the drift coefficient are dyadic too.
pub const DRIFT_START: f64 = 1.0;

fn trial_sgd_rate(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let ds = make_dataset(&DistSpec::Drift, r.n, seed)?;
    let loss = LossSpec::Drift { n: r.n };
    let cfg = OptConfig::new(r.eta, r.t as usize).with_init(vec![DRIFT_START].into());
    let res = run_sgd(&loss, &ds.samples, &cfg)?;
    Ok(vec![
        r.rec("excess_avg", pop_drift(res.averaged[0], r.n).mean),
        r.rec("excess_last", pop_drift(res.last[0], r.n).mean),
    ])
}

fn trial_gd_drift(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let ds = make_dataset(&DistSpec::Drift, r.n, seed)?;
    let sum_z: i64 = ds
        .samples
        .iter()
        .map(|z| match z {
            Sample::Drift(s) => s.z as i64,
            _ => 0,
        })
        .sum();
    let root = (r.n as f64).sqrt();
    let bad = sum_z as f64 <= -root / 2.0;
    let loss = LossSpec::Drift { n: r.n };
    let cfg = OptConfig::new(r.eta, r.t as usize).with_init(vec![DRIFT_START].into());
    let res = run_gd(&loss, &ds.samples, &cfg)?;
    let mut out = vec![
        r.rec("sum_z", sum_z as f64),
        r.rec("bad_dataset", flag(bad)),
        r.rec("excess", pop_drift(res.averaged[0], r.n).mean),
    ];
    if bad {
        let steps = (r.t - 1) as f64;
        out.push(r.rec("last_bound_holds", flag(res.last[0] >= DRIFT_START + steps * r.eta / (4.0 * root))));
        out.push(r.rec("avg_bound_holds", flag(res.averaged[0] >= DRIFT_START + steps * r.eta / (8.0 * root))));
    }
    Ok(out)
}

/// The step size at which both optimizers are compared in the kink and
/// composite experiments.
fn large_eta(n: usize) -> f64 {
    inv_sqrt(n)
}

fn trial_gd_kink_trap(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let n = r.n;
    let ds = make_dataset(&DistSpec::Kink { n }, n, seed)?;
    let loss = LossSpec::Kink { n };
    let f_star = PopSpec::Kink { n }.f_star()?;
    let res = run_gd(&loss, &ds.samples, &OptConfig::new(r.eta, r.t as usize))?;
    let w = res.last[0];
    let trapped = w <= 0.75;
    let ex = pop_kink(w, n).mean - f_star;
    let mut out = vec![r.rec("final_w", w), r.rec("trapped", flag(trapped)), r.rec("excess", ex)];
    if trapped {
        out.push(r.rec("trapped_excess", ex));
    }
    let (eta_l, t_l) = (large_eta(n), n as u64);
    let large = |metric, value| Rec { metric, value, eta: eta_l, t: t_l };
    let sgd = run_sgd(&loss, &ds.samples, &OptConfig::new(eta_l, n))?;
    out.push(large("sgd_final_w", sgd.last[0]));
    out.push(large("sgd_reached", flag(sgd.last[0] >= 0.75)));
    let gd = run_gd(&loss, &ds.samples, &OptConfig::new(eta_l, n))?;
    out.push(large("gd_large_final_w", gd.last[0]));
    out.push(large("gd_large_reached", flag(gd.last[0] >= 0.75)));
    Ok(out)
}

fn composite(n: usize, d: usize) -> (LossSpec, DistSpec, PopSpec) {
    let loss = sum_combine(vec![LossSpec::Drift { n }, LossSpec::Kink { n }, LossSpec::Fa { d }]);
    let dist = DistSpec::Product(vec![
        DistSpec::Drift,
        DistSpec::Kink { n },
        DistSpec::D { delta: 0.1, p: 0.5, a: 1, d },
    ]);
    let pop = PopSpec::Sum(vec![
        (1, PopSpec::Drift { n }),
        (1, PopSpec::Kink { n }),
        (d, PopSpec::Fa { delta: 0.1, p: 0.5, a: 1 }),
    ]);
    (loss, dist, pop)
}

fn trial_composite(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let (loss, dist, pop) = composite(r.n, r.d);
    let ds = make_dataset(&dist, r.n, seed)?;
    let opts = r.pop_opts(seed);
    let obj = build_objective(&loss, &ds.samples)?;
    let mut out = Vec::new();
    for &(eta, t) in &r.gd_grid {
        let res = run_gd_objective(obj.as_ref(), vec![0.0; loss.dim()], &OptConfig::new(eta, t as usize))?;
        let value = excess(&res.averaged, &pop, &opts)?.mean;
        out.push(Rec { metric: "gd_excess", value, eta, t });
    }
    let sgd = run_sgd(&loss, &ds.samples, &OptConfig::new(r.eta, r.t as usize))?;
    out.push(r.rec("sgd_excess", excess(&sgd.averaged, &pop, &opts)?.mean));
    Ok(out)
}

/// Radius of the epoch-start projection ball in the block-loss runs; the
/// `u` coordinate must travel a distance of 1 and the other coordinates
/// move as well, so the unit ball would clip the traversal.
pub const MULTIPASS_RADIUS: f64 = 4.0;

fn trial_multipass(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let (n, k, d) = (r.n, r.k, r.d);
    let ds = make_dataset(&DistSpec::C { k, d, j_star: 1 }, n, seed)?;
    let loss = LossSpec::Fc { n, k, d };
    let cfg = MultipassConfig {
        radius: MULTIPASS_RADIUS,
        trace: true,
        seed,
        ..MultipassConfig::new(k, r.schedule.unwrap_or(Schedule::Fixed))
    };
    let res = run_multipass(&loss, &ds.samples, &cfg)?;
    let selected = res.selected.as_ref().expect("multi-pass always selects a pass");
    let pop = PopSpec::Fc { n, k, j_star: 1 };
    let mut out = vec![r.rec("selected_excess", excess(selected, &pop, &r.pop_opts(seed))?.mean)];
    if let (Some(tr), 1) = (&res.iterate_trace, res.trace_stride) {
        let m = n / 2;
        let err = (1..=k)
            .map(|pass| {
                let u = if pass < k { tr[pass * m][0] } else { res.last[0] };
                (u - pass as f64 / k as f64).abs()
            })
            .fold(0.0, f64::max);
        out.push(r.rec("u_traversal_err", err));
        out.push(r.rec("u_traversal_ok", flag(err <= 1e-9)));
    }
    Ok(out)
}

fn trial_nn(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let (n, d) = (r.n, r.d);
    let ds = make_dataset(&DistSpec::NN { d }, n, seed)?;
    let loss = LossSpec::Nn { d };
    let f_star = PopSpec::Nn.f_star()?;
    let found = find_special_coordinate(&ds, SpecialMode::LabelMatch)?;
    let mut out = vec![r.rec("special_found", flag(found.is_some()))];
    if let Some(j) = found {
        let mut w = vec![0.0; 2 * d];
        w[j - 1] = 1.0;
        w[d + j - 1] = 1.0;
        out.push(r.rec("erm_empirical", empirical_risk(&w, &ds.samples, &loss)?));
        let mc = PopOptions { mc_samples: r.mc, ..PopOptions::monte_carlo_only(seed) };
        out.push(r.rec("erm_excess", pop_nn(&w, &mc)?.mean - f_star));
    }
    let cfg = OptConfig {
        seed,
        projection: Some(BallSpec::origin(2 * d, 1.0)?),
        ..OptConfig::new(r.eta, r.t as usize)
    };
    let sgd = run_sgd(&loss, &ds.samples, &cfg)?;
    out.push(r.rec("sgd_excess", pop_nn(&sgd.averaged, &r.pop_opts(seed))?.mean - f_star));
    Ok(out)
}

fn trial_rerm(r: &Resolved, seed: u64) -> Result<Vec<Rec>> {
    let (n, d) = (r.n, r.d);
    let (delta, p, a) = (0.1, 0.5, 1);
    let ds = make_dataset(&DistSpec::D { delta, p, a, d }, n, seed)?;
    let opts = CertificateOptions { pop: r.pop_opts(seed), ..CertificateOptions::default() };
    let cert = separation_certificate(&ds, &opts)?;
    let mut out = vec![r.rec("special_found", flag(cert.j_hat.is_some()))];
    if cert.j_hat.is_some() {
        out.push(r.rec("erm_empirical", cert.empirical_e_jhat.unwrap_or(f64::NAN)));
        out.push(r.rec("erm_excess", cert.excess_e_jhat.as_ref().map_or(f64::NAN, |e| e.mean)));
        let min = cert.sweep.iter().map(|s| s.population_excess.mean).fold(f64::INFINITY, f64::min);
        out.push(r.rec("rerm_min_excess", min));
        out.push(r.rec("rerm_separated", flag(cert.verdict == Verdict::Separated)));
        let passing = cert.sweep.iter().filter(|s| s.population_excess.mean >= cert.threshold).count();
        out.push(r.rec("rerm_lambda_pass_frac", passing as f64 / cert.sweep.len() as f64));
    }
    let loss = LossSpec::Fa { d };
    let sgd = run_sgd(&loss, &ds.samples, &OptConfig::new(r.eta, r.t as usize).with_init(DenseVector::zeros(d)))?;
    let e = pop_fa(&sgd.averaged, delta, p, a, &r.pop_opts(seed))?.estimate.mean;
    out.push(r.rec("sgd_excess", e));
    if cert.j_hat.is_some() {
        out.push(r.rec("sgd_found_excess", e));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub name: &'static str,
    pub value: f64,
}

/// The reference rate or constant an experiment probes.
pub fn reference_bound(r: &Resolved) -> Bound {
    let n = r.n as f64;
    match r.id {
        ExperimentId::SgdRate => Bound { name: "3/sqrt(n)", value: 3.0 / n.sqrt() },
        ExperimentId::GdDrift => Bound {
            name: "w1/(4 sqrt(n)) + eta (T-1)/(32 n)",
            value: DRIFT_START / (4.0 * n.sqrt()) + r.eta * (r.t - 1) as f64 / (32.0 * n),
        },
        ExperimentId::GdKinkTrap => Bound { name: "1/(4 n^(3/8))", value: 0.25 * n.powf(-0.375) },
        ExperimentId::GdVsSgdComposite => Bound { name: "n^(-5/12)", value: n.powf(-5.0 / 12.0) },
        ExperimentId::MultipassGain => Bound { name: "1/sqrt(n k)", value: 1.0 / (n * r.k as f64).sqrt() },
        ExperimentId::NnErmFail => Bound { name: "F(e_j, e_j) - F*", value: 0.25 },
        ExperimentId::SgdVsRerm => Bound { name: "separation threshold", value: 0.1 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: &'static str,
    pub seed: u64,
    pub trials: u64,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t: u64,
    pub schedule: Option<Schedule>,
    pub mc: usize,
    pub bound: Bound,
    pub metrics: Vec<MetricSummary>,
    pub checks: Vec<Check>,
}

/// A pass/fail property computed from the per-metric summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub holds: bool,
    pub value: f64,
    pub threshold: f64,
}

/// Experiment-level properties: for the composite run, GD at every grid
/// point should be no better than SGD at `η = 1/√n` beyond SGD's 95% interval.
fn checks(r: &Resolved, metrics: &[MetricSummary]) -> Vec<Check> {
    match r.id {
        ExperimentId::GdVsSgdComposite => {
            let Some(sgd) = metrics.iter().find(|m| m.metric == "sgd_excess") else {
                return Vec::new();
            };
            let floor = sgd.mean - 1.96 * sgd.stderr;
            let gd: Vec<&MetricSummary> = metrics.iter().filter(|m| m.metric == "gd_excess").collect();
            let held = gd.iter().filter(|m| m.mean >= floor).count();
            vec![Check {
                name: "gd_pairs_not_better_than_sgd",
                holds: held == gd.len(),
                value: held as f64,
                threshold: gd.len() as f64,
            }]
        }
        ExperimentId::GdDrift => {
            let failures = metrics
                .iter()
                .filter(|m| m.metric.ends_with("_bound_holds"))
                .map(|m| (1.0 - m.mean) * m.count as f64)
                .sum::<f64>();
            vec![Check { name: "bad_dataset_bound_failures", holds: failures == 0.0, value: failures, threshold: 0.0 }]
        }
        _ => Vec::new(),
    }
}

impl RunSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summary: RunSummary,
}

/// Runs every trial (in parallel on the current rayon pool) and returns
/// records in trial order.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    let r = spec.resolve()?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..r.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<TrialRecord>> {
            let seed = trial_seed(r.seed, trial);
            let recs = match r.id {
                ExperimentId::SgdRate => trial_sgd_rate(&r, seed),
                ExperimentId::GdDrift => trial_gd_drift(&r, seed),
                ExperimentId::GdKinkTrap => trial_gd_kink_trap(&r, seed),
                ExperimentId::GdVsSgdComposite => trial_composite(&r, seed),
                ExperimentId::MultipassGain => trial_multipass(&r, seed),
                ExperimentId::NnErmFail => trial_nn(&r, seed),
                ExperimentId::SgdVsRerm => trial_rerm(&r, seed),
            }?;
            Ok(recs
                .into_iter()
                .map(|x| {
                    debug_assert!(METRICS.contains(&x.metric), "unregistered metric {}", x.metric);
                    TrialRecord {
                        experiment: r.id.as_str().to_string(),
                        trial,
                        seed,
                        n: r.n,
                        d: r.d,
                        k: r.k,
                        eta: x.eta,
                        t: x.t,
                        metric: x.metric.to_string(),
                        value: x.value,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let metrics = summarize(&records);
    let summary = RunSummary {
        experiment: r.id.as_str(),
        seed: r.seed,
        trials: r.trials,
        n: r.n,
        d: r.d,
        k: r.k,
        eta: r.eta,
        t: r.t,
        schedule: r.schedule,
        mc: r.mc,
        bound: reference_bound(&r),
        checks: checks(&r, &metrics),
        metrics,
    };
    Ok(RunOutput { records, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    N,
    K,
    Eta,
    #[value(name = "T")]
    #[serde(rename = "T")]
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub experiment: &'static str,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub metric: &'static str,
    pub means: Vec<f64>,
    pub loglog_slope: Option<f64>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summary: SweepSummary,
}

fn whole(v: f64, axis: Axis) -> Result<u64> {
    ensure!(v >= 1.0 && v.fract() == 0.0 && v < 2f64.powi(53), "{axis:?} values must be positive integers, got {v}");
    Ok(v as u64)
}

/// One run per axis value, records concatenated in value order.
pub fn sweep(spec: &ExperimentSpec, axis: Axis, values: &[f64]) -> Result<SweepOutput> {
    ensure!(!values.is_empty(), "a sweep needs at least one value");
    if axis == Axis::K && spec.id != ExperimentId::MultipassGain {
        bail!("the k axis only applies to multipass-gain");
    }
    let mut records = Vec::new();
    let mut runs = Vec::new();
    for &v in values {
        let mut s = spec.clone();
        match axis {
            Axis::N => s.n = Some(whole(v, axis)? as usize),
            Axis::K => s.k = Some(whole(v, axis)? as usize),
            Axis::Eta => s.eta = Some(v),
            Axis::T => s.t = Some(whole(v, axis)?),
        }
        let out = run(&s)?;
        records.extend(out.records);
        runs.push(out.summary);
    }
    let metric = spec.id.primary_metric();
    let means: Vec<f64> = runs.iter().map(|r| r.metric(metric).map_or(f64::NAN, |m| m.mean)).collect();
    let pts: Vec<(f64, f64)> = values.iter().copied().zip(means.iter().copied()).collect();
    let slope = if means.iter().all(|m| m.is_finite()) { loglog_slope(&pts) } else { None };
    Ok(SweepOutput {
        records,
        summary: SweepSummary {
            experiment: spec.id.as_str(),
            axis,
            values: values.to_vec(),
            metric,
            means,
            loglog_slope: slope,
            runs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: ExperimentId) -> ExperimentSpec {
        ExperimentSpec { trials: Some(3), ..ExperimentSpec::new(id) }
    }

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("nope".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn defaults_resolve() {
        let r = ExperimentSpec::new(ExperimentId::SgdVsRerm).resolve().unwrap();
        assert_eq!((r.n, r.d, r.trials), (12, 9433, 100));
        let r = ExperimentSpec::new(ExperimentId::GdKinkTrap).resolve().unwrap();
        assert_eq!(r.eta, 1.0 / (128.0 * 32768.0));
        let r = ExperimentSpec::new(ExperimentId::MultipassGain).resolve().unwrap();
        assert_eq!((r.k, r.t, r.schedule), (4, 128, Some(Schedule::Fixed)));
        let r = ExperimentSpec::new(ExperimentId::GdVsSgdComposite).resolve().unwrap();
        assert_eq!(r.gd_grid.len(), 7 * 3);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let s = ExperimentSpec { n: Some(40), ..ExperimentSpec::new(ExperimentId::NnErmFail) };
        assert!(s.resolve().is_err());
        let s = ExperimentSpec { t: Some(500), ..ExperimentSpec::new(ExperimentId::SgdRate) };
        assert!(s.resolve().is_err());
        let s = ExperimentSpec { k: Some(2), ..ExperimentSpec::new(ExperimentId::SgdRate) };
        assert!(s.resolve().is_err());
        assert!(sweep(&small(ExperimentId::SgdRate), Axis::N, &[]).is_err());
        assert!(sweep(&small(ExperimentId::SgdRate), Axis::N, &[6.5]).is_err());
    }

    #[test]
    fn sgd_rate_example_bound() {
        let s = ExperimentSpec { n: Some(400), ..ExperimentSpec::new(ExperimentId::SgdRate) };
        let out = run(&s).unwrap();
        let m = out.summary.metric("excess_avg").unwrap();
        assert_eq!(m.count, 50);
        assert!(m.mean <= 3.0 / 20.0, "{}", m.mean);
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let s = ExperimentSpec { n: Some(64), ..small(ExperimentId::GdDrift) };
        let swept = sweep(&ExperimentSpec { n: None, ..s.clone() }, Axis::N, &[64.0]).unwrap();
        assert_eq!(swept.records, run(&s).unwrap().records);
    }

    #[test]
    fn forced_bad_drift_datasets_obey_the_average_bound() {
        let s = ExperimentSpec { trials: Some(400), ..ExperimentSpec::new(ExperimentId::GdDrift) };
        let out = run(&s).unwrap();
        let holds: Vec<f64> = out.records.iter().filter(|r| r.metric == "avg_bound_holds").map(|r| r.value).collect();
        assert!(!holds.is_empty());
        assert!(holds.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn every_experiment_runs_small() {
        for id in ExperimentId::ALL {
            let mut s = small(id);
            match id {
                ExperimentId::GdKinkTrap => {
                    s.n = Some(16);
                    s.t = Some(2000);
                }
                ExperimentId::SgdVsRerm | ExperimentId::NnErmFail => {
                    s.n = Some(8);
                    s.mc = Some(500);
                }
                ExperimentId::GdVsSgdComposite => s.n = Some(16),
                ExperimentId::MultipassGain => s.d = Some(8),
                _ => {}
            }
            let out = run(&s).unwrap();
            assert!(!out.records.is_empty(), "{id:?}");
            assert!(out.records.iter().all(|r| r.value.is_finite()), "{id:?}");
        }
    }
}
