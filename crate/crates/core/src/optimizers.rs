//! Single-pass SGD, full-batch GD and multi-pass SGD with validation.
//!
//! A run of horizon `T` produces iterates `w_1 .. w_T` from `T − 1` updates;
//! `last` is `w_T` and `averaged` is the mean of all `T` iterates.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{n_pow_5_4, Sample};
use crate::error::{check_len, Error, Result};
use crate::losses::{kink_h, LossSpec};
use crate::rng::{Domain, StreamKey};
use crate::vecspace::{norm, project_ball_in_place, BallSpec, DenseVector};

/// Iterates kept when tracing; longer runs are strided down to this.
pub const MAX_TRACE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Averaging {
    Last,
    AverageAll,
}

#[derive(Debug, Clone, Copy)]
pub enum InitMode<'a> {
    Zero,
    UnitSphere,
    /// Zero for every construction except the network, which starts on the
    /// unit sphere.
    ConstructionDefault(&'a LossSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    pub eta: f64,
    /// Number of iterates, so `t − 1` updates.
    pub t: usize,
    pub seed: u64,
    pub averaging: Averaging,
    /// Applied after every update.
    pub projection: Option<BallSpec>,
    /// Starting point; `None` means the construction's default.
    pub init: Option<DenseVector>,
    pub trace: bool,
}

impl OptConfig {
    pub fn new(eta: f64, t: usize) -> Self {
        Self {
            eta,
            t,
            seed: 0,
            averaging: Averaging::AverageAll,
            projection: None,
            init: None,
            trace: false,
        }
    }

    pub fn with_init(mut self, w: DenseVector) -> Self {
        self.init = Some(w);
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Parameter(format!("step size must be finite and ≥ 0, got {}", self.eta)));
        }
        if self.t == 0 {
            return Err(Error::Parameter("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub last: DenseVector,
    pub averaged: DenseVector,
    pub per_pass_averages: Vec<DenseVector>,
    pub selected: Option<DenseVector>,
    pub iterate_trace: Option<Vec<DenseVector>>,
    /// Iterate `i` of the trace is `w_{1 + i·stride}`.
    pub trace_stride: usize,
}

impl RunResult {
    pub fn output(&self, averaging: Averaging) -> &DenseVector {
        match averaging {
            Averaging::Last => &self.last,
            Averaging::AverageAll => &self.averaged,
        }
    }
}

pub fn initial_point(mode: InitMode<'_>, d: usize, seed: u64) -> DenseVector {
    match mode {
        InitMode::Zero => DenseVector::zeros(d),
        InitMode::UnitSphere => {
            let mut rng = StreamKey::new(seed, Domain::Init).stream(0);
            loop {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let r = norm(&g);
                if r > 0.0 {
                    return g.into_iter().map(|v| v / r).collect::<Vec<_>>().into();
                }
            }
        }
        InitMode::ConstructionDefault(LossSpec::Nn { .. }) => initial_point(InitMode::UnitSphere, d, seed),
        InitMode::ConstructionDefault(_) => DenseVector::zeros(d),
    }
}

/// Empirical mean loss with its subgradient.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Returns `F_S(w)` and overwrites `grad` with a subgradient.
    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, w: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim()];
        self.value_grad(w, &mut scratch)
    }
}

/// Sample-by-sample evaluation in dataset order.
pub struct Empirical<'a> {
    pub loss: &'a LossSpec,
    pub samples: &'a [Sample],
}

impl Objective for Empirical<'_> {
    fn dim(&self) -> usize {
        self.loss.dim()
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if self.samples.is_empty() {
            return 0.0;
        }
        let weight = 1.0 / self.samples.len() as f64;
        let total: f64 = self.samples.iter().map(|z| self.loss.accumulate(w, z, weight, grad)).sum();
        total * weight
    }
}

/// Empirical kink loss. Kink locations are sorted so that only the few whose
/// support can contain `w` are visited.
pub struct KinkObjective {
    n: usize,
    m: usize,
    /// `(β, y)` ascending in β.
    kinks: Vec<(f64, f64)>,
    width: f64,
}

impl KinkObjective {
    pub fn new(n: usize, samples: &[Sample]) -> Result<Self> {
        let mut kinks = Vec::with_capacity(samples.len());
        for z in samples {
            match z {
                Sample::Kink(s) => kinks.push((s.beta, s.y as f64)),
                _ => return Err(Error::Configuration("kink objective needs kink samples".into())),
            }
        }
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            n,
            m: samples.len(),
            kinks,
            width: 1.0 / (16.0 * n_pow_5_4(n)),
        })
    }
}

impl Objective for KinkObjective {
    fn dim(&self) -> usize {
        1
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let w = w[0];
        let base = (self.n as f64).powf(-0.375);
        let (lin, dlin) = if w < 1.0 { (-w, -1.0) } else { (-1.0, 0.0) };
        let (mut h, mut dh) = (0.0, 0.0);
        // Widened by a hair; kink_h itself decides membership exactly.
        let pad = 1e-9 * self.width;
        let lo = self.kinks.partition_point(|k| k.0 < w - self.width - pad);
        for &(beta, y) in &self.kinks[lo..] {
            if beta > w + pad {
                break;
            }
            let (v, d) = kink_h(w - beta, self.n);
            h += y * v;
            dh += y * d;
        }
        let m = self.m.max(1) as f64;
        grad[0] = base * dlin + dh / m;
        base * lin + h / m
    }
}

/// Empirical drift loss `(1/(4√n) + z̄)|w|`.
pub struct DriftObjective {
    coef: f64,
}

impl DriftObjective {
    pub fn new(n: usize, samples: &[Sample]) -> Result<Self> {
        let mut sum = 0i64;
        for z in samples {
            match z {
                Sample::Drift(s) => sum += s.z as i64,
                _ => return Err(Error::Configuration("drift objective needs drift samples".into())),
            }
        }
        let zbar = if samples.is_empty() { 0.0 } else { sum as f64 / samples.len() as f64 };
        Ok(Self {
            coef: 1.0 / (4.0 * (n as f64).sqrt()) + zbar,
        })
    }

    pub fn coefficient(&self) -> f64 {
        self.coef
    }
}

impl Objective for DriftObjective {
    fn dim(&self) -> usize {
        1
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = if w[0] > 0.0 {
            self.coef
        } else if w[0] < 0.0 {
            -self.coef
        } else {
            0.0
        };
        self.coef * w[0].abs()
    }
}

/// Independent parts on consecutive slices, each scaled: part `i` sees
/// `scale · w_i` and contributes `weight · f_i(scale · w_i)`.
struct Blocks<'a> {
    dim: usize,
    parts: Vec<(usize, Box<dyn Objective + 'a>)>,
    scale: f64,
    weight: f64,
}

impl Objective for Blocks<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (off, part) in &self.parts {
            let r = *off..*off + part.dim();
            total += if self.scale == 1.0 {
                part.value_grad(&w[r.clone()], &mut grad[r])
            } else {
                let wb: Vec<f64> = w[r.clone()].iter().map(|v| v * self.scale).collect();
                let v = part.value_grad(&wb, &mut grad[r.clone()]);
                grad[r].iter_mut().for_each(|g| *g *= self.scale);
                v
            };
        }
        for g in grad.iter_mut() {
            *g *= self.weight;
        }
        total * self.weight
    }
}

fn split_tuple(samples: &[Sample], parts: usize) -> Result<Vec<Vec<Sample>>> {
    let mut cols = vec![Vec::with_capacity(samples.len()); parts];
    for z in samples {
        match z {
            Sample::Tuple(zs) if zs.len() == parts => {
                for (c, s) in cols.iter_mut().zip(zs) {
                    c.push(s.clone());
                }
            }
            _ => return Err(Error::Configuration("composite loss needs tuple samples".into())),
        }
    }
    Ok(cols)
}

/// The fastest exact evaluator for `F_S` under `loss`.
pub fn build_objective<'a>(loss: &'a LossSpec, samples: &'a [Sample]) -> Result<Box<dyn Objective + 'a>> {
    for z in samples {
        loss.check_sample(z)?;
    }
    build_unchecked(loss, samples)
}

fn build_unchecked<'a>(loss: &'a LossSpec, samples: &'a [Sample]) -> Result<Box<dyn Objective + 'a>> {
    Ok(match loss {
        LossSpec::Kink { n } => Box::new(KinkObjective::new(*n, samples)?),
        LossSpec::Drift { n } => Box::new(DriftObjective::new(*n, samples)?),
        LossSpec::Sum { dim, parts } => {
            let cols = split_tuple(samples, parts.len())?;
            let mut built: Vec<(usize, Box<dyn Objective + 'a>)> = Vec::new();
            for (p, col) in parts.iter().zip(cols) {
                built.push((p.offset, owned(&p.spec, col)?));
            }
            Box::new(Blocks { dim: *dim, parts: built, scale: 1.0, weight: 1.0 })
        }
        LossSpec::Grid(g) => {
            let cols = split_tuple(samples, g.components.len())?;
            let mut built: Vec<(usize, Box<dyn Objective + 'a>)> = Vec::new();
            for ((off, c), col) in g.offsets().into_iter().zip(&g.components).zip(cols) {
                built.push((off, owned(c, col)?));
            }
            Box::new(Blocks {
                dim: loss.dim(),
                parts: built,
                scale: g.rescale(),
                weight: 1.0 / g.m() as f64,
            })
        }
        _ => Box::new(Empirical { loss, samples }),
    })
}

/// Like `build_unchecked` for a component whose samples were split out of
/// tuples and are owned by the objective.
fn owned<'a>(loss: &'a LossSpec, samples: Vec<Sample>) -> Result<Box<dyn Objective + 'a>> {
    struct Owning<'a> {
        loss: &'a LossSpec,
        samples: Vec<Sample>,
    }
    impl Objective for Owning<'_> {
        fn dim(&self) -> usize {
            self.loss.dim()
        }
        fn value_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
            Empirical { loss: self.loss, samples: &self.samples }.value_grad(w, grad)
        }
    }
    Ok(match loss {
        LossSpec::Kink { n } => Box::new(KinkObjective::new(*n, &samples)?),
        LossSpec::Drift { n } => Box::new(DriftObjective::new(*n, &samples)?),
        // Nested composites fall back to sample-by-sample evaluation.
        _ => Box::new(Owning { loss, samples }),
    })
}

/// Running sum and optional strided trace of the iterates.
struct Recorder {
    sum: Vec<f64>,
    count: usize,
    trace: Option<Vec<DenseVector>>,
    stride: usize,
}

impl Recorder {
    fn new(d: usize, total: usize, trace: bool) -> Self {
        Self {
            sum: vec![0.0; d],
            count: 0,
            trace: trace.then(Vec::new),
            stride: total.div_ceil(MAX_TRACE).max(1),
        }
    }

    fn push(&mut self, w: &[f64]) {
        for (s, v) in self.sum.iter_mut().zip(w) {
            *s += v;
        }
        if let Some(tr) = self.trace.as_mut() {
            if self.count % self.stride == 0 {
                tr.push(w.to_vec().into());
            }
        }
        self.count += 1;
    }

    fn mean(&self) -> DenseVector {
        let c = self.count as f64;
        self.sum.iter().map(|s| s / c).collect::<Vec<_>>().into()
    }
}

fn start(loss: &LossSpec, cfg: &OptConfig) -> Result<Vec<f64>> {
    cfg.check()?;
    let d = loss.dim();
    let w = match &cfg.init {
        Some(w) => {
            check_len(d, w.len())?;
            w.to_vec()
        }
        None => initial_point(InitMode::ConstructionDefault(loss), d, cfg.seed).into_inner(),
    };
    Ok(w)
}

fn step(w: &mut [f64], grad: &[f64], eta: f64, projection: Option<&BallSpec>) -> Result<()> {
    for (wi, gi) in w.iter_mut().zip(grad) {
        *wi -= eta * gi;
    }
    if let Some(ball) = projection {
        project_ball_in_place(w, ball)?;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("iterate became non-finite".into()));
    }
    Ok(())
}

/// One fresh sample per update, in dataset order.
pub fn run_sgd(loss: &LossSpec, samples: &[Sample], cfg: &OptConfig) -> Result<RunResult> {
    let mut w = start(loss, cfg)?;
    if cfg.t > samples.len().max(1) {
        return Err(Error::DataExhausted {
            needed: cfg.t,
            available: samples.len(),
        });
    }
    for z in &samples[..cfg.t - 1] {
        loss.check_sample(z)?;
    }
    let mut rec = Recorder::new(w.len(), cfg.t, cfg.trace);
    let mut grad = vec![0.0; w.len()];
    rec.push(&w);
    for z in &samples[..cfg.t - 1] {
        grad.iter_mut().for_each(|g| *g = 0.0);
        loss.accumulate(&w, z, 1.0, &mut grad);
        step(&mut w, &grad, cfg.eta, cfg.projection.as_ref())?;
        rec.push(&w);
    }
    Ok(finish(w, rec))
}

/// Full-batch subgradient descent on the empirical mean.
pub fn run_gd(loss: &LossSpec, samples: &[Sample], cfg: &OptConfig) -> Result<RunResult> {
    let w = start(loss, cfg)?;
    let obj = build_objective(loss, samples)?;
    run_gd_objective(obj.as_ref(), w, cfg)
}

pub fn run_gd_objective(obj: &dyn Objective, mut w: Vec<f64>, cfg: &OptConfig) -> Result<RunResult> {
    cfg.check()?;
    check_len(obj.dim(), w.len())?;
    let mut rec = Recorder::new(w.len(), cfg.t, cfg.trace);
    let mut grad = vec![0.0; w.len()];
    rec.push(&w);
    for _ in 1..cfg.t {
        obj.value_grad(&w, &mut grad);
        step(&mut w, &grad, cfg.eta, cfg.projection.as_ref())?;
        rec.push(&w);
    }
    Ok(finish(w, rec))
}

fn finish(w: Vec<f64>, rec: Recorder) -> RunResult {
    RunResult {
        last: w.into(),
        averaged: rec.mean(),
        per_pass_averages: Vec::new(),
        selected: None,
        trace_stride: rec.stride,
        iterate_trace: rec.trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Schedule {
    /// `η_j = 1/√(nj)` during pass `j`.
    PerPass,
    /// `η = 1/√(kn)` throughout.
    Fixed,
}

impl Schedule {
    pub fn eta(self, n: usize, k: usize, pass: usize) -> f64 {
        match self {
            Schedule::PerPass => 1.0 / ((n * pass) as f64).sqrt(),
            Schedule::Fixed => 1.0 / ((n * k) as f64).sqrt(),
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_pass" | "perpass" => Ok(Schedule::PerPass),
            "fixed" => Ok(Schedule::Fixed),
            _ => Err(Error::Parameter(format!("unknown schedule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipassConfig {
    pub k: usize,
    pub schedule: Schedule,
    /// Radius of the epoch-start projection ball around `w_1`.
    pub radius: f64,
    pub seed: u64,
    pub init: Option<DenseVector>,
    pub trace: bool,
}

impl MultipassConfig {
    pub fn new(k: usize, schedule: Schedule) -> Self {
        Self {
            k,
            schedule,
            radius: 1.0,
            seed: 0,
            init: None,
            trace: false,
        }
    }
}

/// `k` ordered passes over the first half of the data. Pass `j` ends with
/// `ŵ_j`, the mean of every iterate produced so far; the returned
/// `selected` point is the `ŵ_j` with the smallest loss on the second half,
/// ties going to the earliest pass.
pub fn run_multipass(loss: &LossSpec, samples: &[Sample], cfg: &MultipassConfig) -> Result<RunResult> {
    let n = samples.len();
    if n == 0 || n % 2 != 0 {
        return Err(Error::Parameter(format!("multi-pass SGD needs an even, nonzero sample count, got {n}")));
    }
    if cfg.k == 0 {
        return Err(Error::Parameter("at least one pass is required".into()));
    }
    for z in samples {
        loss.check_sample(z)?;
    }
    let (train, valid) = samples.split_at(n / 2);
    let d = loss.dim();
    let w1 = match &cfg.init {
        Some(w) => {
            check_len(d, w.len())?;
            w.clone()
        }
        None => initial_point(InitMode::ConstructionDefault(loss), d, cfg.seed),
    };
    let ball = BallSpec::new(w1.clone(), cfg.radius)?;
    let validation = build_objective(loss, valid)?;
    let mut w = w1.into_inner();
    let mut rec = Recorder::new(d, cfg.k * train.len(), cfg.trace);
    let mut grad = vec![0.0; d];
    let mut per_pass = Vec::with_capacity(cfg.k);
    let mut best: Option<(f64, usize)> = None;
    for pass in 1..=cfg.k {
        project_ball_in_place(&mut w, &ball)?;
        let eta = cfg.schedule.eta(n, cfg.k, pass);
        for z in train {
            rec.push(&w);
            grad.iter_mut().for_each(|g| *g = 0.0);
            loss.accumulate(&w, z, 1.0, &mut grad);
            step(&mut w, &grad, eta, None)?;
        }
        let avg = rec.mean();
        let v = validation.value(&avg);
        if best.map_or(true, |(b, _)| v < b) {
            best = Some((v, pass - 1));
        }
        per_pass.push(avg);
    }
    let selected = per_pass[best.expect("k ≥ 1").1].clone();
    Ok(RunResult {
        last: w.into(),
        averaged: rec.mean(),
        selected: Some(selected),
        per_pass_averages: per_pass,
        trace_stride: rec.stride,
        iterate_trace: rec.trace,
    })
}
