//! Executable checks of the structural lemmas behind the constructions.
//!
//! Every oracle is a pure function of its parameters and seed. Trials are
//! split into fixed chunks, each with its own random stream, and merged in
//! chunk order, so reports do not depend on the number of worker threads.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::distributions::{grid_h_len, grid_point, n_pow_5_4, DistSpec, GeneralLb, Sample, SampleB};
use crate::error::{Error, Result};
use crate::losses::{kink_h, sum_combine, LossSpec};
use crate::population::{fc_optimum, PopOptions, PopSpec};
use crate::rng::{Domain, StreamKey, StreamRng};
use crate::vecspace::{dist, norm, BitMask};

const Z95: f64 = 1.959_963_984_540_054;
const CHUNK: usize = 1000;

/// Absolute slack subtracted from every probabilistic lower bound.
pub const FREQUENCY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub id: String,
    pub trials: u64,
    pub passes: u64,
    pub threshold: f64,
    pub slack: f64,
    pub verdict: Verdict,
    pub details: Value,
}

impl OracleReport {
    /// Every trial must pass.
    fn deterministic(id: &str, trials: u64, passes: u64, details: Value) -> Self {
        Self {
            id: id.into(),
            trials,
            passes,
            threshold: 1.0,
            slack: 0.0,
            verdict: if passes == trials { Verdict::Pass } else { Verdict::Fail },
            details,
        }
    }

    /// `passes / trials ≥ threshold`; a non-positive threshold is vacuous.
    fn frequency(id: &str, trials: u64, passes: u64, threshold: f64, slack: f64, details: Value) -> Self {
        let verdict = if threshold <= 0.0 || trials == 0 {
            Verdict::Inconclusive
        } else if passes as f64 / trials as f64 >= threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            id: id.into(),
            trials,
            passes,
            threshold,
            slack,
            verdict,
            details,
        }
    }

    pub fn frequency_observed(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.passes as f64 / self.trials as f64
        }
    }
}

/// Fixed-width table, one row per report.
pub fn format_table(reports: &[OracleReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>9} {:>9} {:>10} {:>9}  verdict", "oracle", "trials", "passes", "frequency", "threshold");
    for r in reports {
        let verdict = serde_json::to_value(r.verdict).unwrap();
        let _ = writeln!(
            out,
            "{:<24} {:>9} {:>9} {:>10.4} {:>9.4}  {}",
            r.id,
            r.trials,
            r.passes,
            r.frequency_observed(),
            r.threshold,
            verdict.as_str().unwrap_or("?")
        );
    }
    out
}

/// Runs `trial(rng, index)` for `trials` indices in chunks, merging chunk
/// results in order.
fn chunked<T: Send>(seed: u64, tag: u64, trials: u64, trial: impl Fn(&mut StreamRng, u64) -> T + Sync) -> Vec<T> {
    let key = StreamKey::with_tag(seed, Domain::Oracle, tag);
    let chunks = trials.div_ceil(CHUNK as u64);
    let per_chunk: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = key.stream(c);
            let end = ((c + 1) * CHUNK as u64).min(trials);
            (c * CHUNK as u64..end).map(|i| trial(&mut rng, i)).collect()
        })
        .collect();
    per_chunk.into_iter().flatten().collect()
}

fn random_mask<R: Rng + ?Sized>(d: usize, rng: &mut R) -> BitMask {
    let q: f64 = rng.gen();
    BitMask::from_bits(&(0..d).map(|_| rng.gen::<f64>() < q).collect::<Vec<_>>())
}

/// Uniform in the ball of the given radius, or on its boundary.
fn random_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, on_boundary: bool, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let r = norm(&g).max(1e-300);
    let scale = if on_boundary {
        radius
    } else {
        radius * rng.gen::<f64>().powf(1.0 / d as f64)
    };
    g.iter().map(|v| v * scale / r).collect()
}

fn random_fb_case<R: Rng + ?Sized>(rng: &mut R, trial: u64, radius: f64) -> (Vec<f64>, SampleB, f64) {
    let d = rng.gen_range(1..=8);
    let w = match trial % 20 {
        0 => vec![0.0; d],
        1 | 2 => random_in_ball(d, radius, true, rng),
        _ => random_in_ball(d, radius, false, rng),
    };
    let z = SampleB {
        x: random_mask(d, rng),
        alpha: rng.gen_range(0..=d),
    };
    let c_n = rng.gen_range(0.0..=0.25);
    (w, z, c_n)
}

/// One subgradient step on the quartic loss with `η = 1/100` from `‖w‖ ≤ 2.5`
/// never leaves the 2.5-ball.
pub fn oracle_bounded_iterates(trials: u64, seed: u64) -> OracleReport {
    let eta = 0.01;
    let results = chunked(seed, 1, trials, |rng, i| {
        let (w, z, c_n) = random_fb_case(rng, i, 2.5);
        let loss = LossSpec::Fb { d: w.len(), c_n };
        let mut g = vec![0.0; w.len()];
        loss.accumulate(&w, &Sample::B(z), 1.0, &mut g);
        let next: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - eta * g).collect();
        norm(&next)
    });
    let passes = results.iter().filter(|&&r| r <= 2.5 + 1e-12).count() as u64;
    let worst = results.iter().fold(0.0f64, |m, &r| m.max(r));
    OracleReport::deterministic(
        "bounded-iterates",
        trials,
        passes,
        json!({ "eta": eta, "radius": 2.5, "max_successor_norm": worst }),
    )
}

/// Subgradients of the quartic loss on the 2.5-ball have norm at most 70.
pub fn oracle_lipschitz_fb(trials: u64, seed: u64) -> OracleReport {
    let results = chunked(seed, 2, trials, |rng, i| {
        let (w, z, c_n) = random_fb_case(rng, i, 2.5);
        let loss = LossSpec::Fb { d: w.len(), c_n };
        let mut g = vec![0.0; w.len()];
        loss.accumulate(&w, &Sample::B(z), 1.0, &mut g);
        norm(&g)
    });
    let passes = results.iter().filter(|&&r| r <= 70.0).count() as u64;
    let worst = results.iter().fold(0.0f64, |m, &r| m.max(r));
    OracleReport::deterministic("lipschitz-fb", trials, passes, json!({ "bound": 70.0, "max_subgradient_norm": worst }))
}

/// Variance of the kink-loss stochastic gradient at three points: below
/// every kink, inside one kink's support, and past 1. The label is averaged
/// out in closed form. The verdict uses exact enumeration over kink
/// locations; a Monte Carlo estimate with its interval is reported beside it.
pub fn oracle_variance_kink(n: usize, mc: u64, seed: u64) -> OracleReport {
    let big_n = n_pow_5_4(n);
    let m = grid_h_len(n);
    let mid_kink = grid_point(n, m / 2) + 1.0 / (32.0 * big_n);
    let points = [("below_kinks", 0.1), ("inside_kink", mid_kink), ("past_one", 2.0)];
    let bound = 0.26;
    let mut rows = Vec::new();
    let mut passes = 0;
    for (tag, (name, w)) in points.iter().enumerate() {
        // g = c + y h′ with E y = 0, so Var g = E h′².
        let dh_sq = |i: u64| kink_h(w - grid_point(n, i), n).1.powi(2);
        let exact = (1..=m).map(dh_sq).sum::<f64>() / m as f64;
        let draws = chunked(seed, 16 + tag as u64, mc, |rng, _| dh_sq(rng.gen_range(1..=m)));
        let mean = draws.iter().sum::<f64>() / mc as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mc as f64 - 1.0)).sqrt();
        passes += u64::from(exact <= bound);
        rows.push(json!({
            "point": name,
            "w": w,
            "variance": exact,
            "variance_mc": mean,
            "half_width_95": Z95 * sd / (mc as f64).sqrt(),
        }));
    }
    OracleReport::deterministic(
        "kink-variance",
        points.len() as u64,
        passes,
        json!({ "n": n, "samples": mc, "bound": bound, "points": rows }),
    )
}

/// For every `w` with `1 < ‖w‖ ≤ 3`, the radial projection `w/‖w‖` has a
/// strictly smaller population loss, so every minimizer lies in the unit
/// ball. The direct comparison against `F(0)` is reported alongside.
pub fn oracle_minimizer_bound(grid: usize, seed: u64) -> OracleReport {
    let deltas = [0.01, 0.05, 0.1, 0.25, 0.5];
    let results = chunked(seed, 3, (grid * deltas.len()) as u64, |rng, i| {
        let delta = deltas[(i as usize) % deltas.len()];
        let d = rng.gen_range(1..=6);
        let v = rng.gen_range(0..=d);
        let r = 1.0 + 2.0 * ((i as usize / deltas.len()) as f64 + 1.0) / grid as f64;
        let w = random_in_ball(d, r, true, rng);
        let inside: Vec<f64> = w.iter().map(|x| x / norm(&w)).collect();
        let f = |p: &[f64]| crate::population::pop_fb(p, delta, v).mean;
        (f(&inside) < f(&w), f(&w) > f(&vec![0.0; d]))
    });
    let passes = results.iter().filter(|r| r.0).count() as u64;
    let direct = results.iter().filter(|r| r.1).count();
    let at_two = crate::population::pop_fb(&[2.0, 0.0], 0.1, 1).mean - crate::population::pop_fb(&[0.0, 0.0], 0.1, 1).mean;
    OracleReport::deterministic(
        "minimizer-bound",
        results.len() as u64,
        passes,
        json!({
            "norm_range": [1.0, 3.0],
            "direct_comparison_with_origin": direct,
            "excess_2e1_over_origin": at_two,
        }),
    )
}

/// `⌈ln(n) / (2 n^{1/4})⌉`.
pub fn balls_and_bins_window(n: usize) -> usize {
    ((n as f64).ln() / (2.0 * (n as f64).powf(0.25))).ceil().max(1.0) as usize
}

/// Draws `n` kink samples and checks whether some `ĵ` inside the window has
/// distinct first `ĵ + 1` order statistics and `y_(ĵ) = +1`.
pub fn oracle_balls_and_bins(n: usize, trials: u64, seed: u64) -> OracleReport {
    let k = balls_and_bins_window(n);
    let m = grid_h_len(n).max(1);
    let results = chunked(seed, 4, trials, |rng, _| {
        let mut draws: Vec<(u64, i8)> = (0..n)
            .map(|_| (rng.gen_range(1..=m), if rng.gen::<bool>() { 1 } else { -1 }))
            .collect();
        draws.sort_by_key(|d| d.0);
        // Length of the strictly increasing prefix of order statistics.
        let distinct = draws.windows(2).position(|p| p[0].0 == p[1].0).map_or(n, |i| i + 1);
        let hit = |j: usize| j < distinct && draws[j - 1].1 == 1;
        let in_window = (1..=k.min(n)).any(hit);
        let anywhere = (1..distinct.max(1)).any(hit);
        (in_window, anywhere)
    });
    let passes = results.iter().filter(|r| r.0).count() as u64;
    let anywhere = results.iter().filter(|r| r.1).count() as f64 / trials.max(1) as f64;
    let lower_bound = 1.0 - 2.0 / (n as f64).powf(0.25);
    OracleReport::frequency(
        "balls-and-bins",
        trials,
        passes,
        lower_bound - FREQUENCY_SLACK,
        FREQUENCY_SLACK,
        json!({
            "n": n,
            "window": k,
            "bins": m,
            "lower_bound": lower_bound,
            "frequency_any_index": anywhere,
        }),
    )
}

/// At random `w` in the unit ball, checks
/// `F(w) − F(0) ≤ ½⟨∇F(w), w⟩ + 3·CI` for the diagonal network, with every
/// expectation estimated on the same draws.
pub fn oracle_linearizable_nn(d: usize, points: u64, mc: usize, seed: u64) -> OracleReport {
    let loss = LossSpec::Nn { d };
    let spec = DistSpec::NN { d };
    let results = chunked(seed, 5, points, |rng, i| {
        let w = match i {
            0 => vec![0.0; 2 * d],
            1 => {
                let mut w = vec![0.0; 2 * d];
                w[0] = 1.0;
                w[d] = 1.0;
                w
            }
            _ => random_in_ball(2 * d, 1.0, false, rng),
        };
        let (mut s_diff, mut s_diff2) = (0.0, 0.0);
        let mut g = vec![0.0; 2 * d];
        for _ in 0..mc {
            let z = spec.sample(rng);
            g.iter_mut().for_each(|v| *v = 0.0);
            let f = loss.accumulate(&w, &z, 1.0, &mut g);
            let f0 = match &z {
                Sample::NN(s) => s.y as f64,
                _ => unreachable!(),
            };
            let ip: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
            let diff = f - f0 - 0.5 * ip;
            s_diff += diff;
            s_diff2 += diff * diff;
        }
        let m = mc as f64;
        let mean = s_diff / m;
        let var = ((s_diff2 - m * mean * mean) / (m - 1.0)).max(0.0);
        let ci = Z95 * (var / m).sqrt();
        // D is exactly 0 or −2 per sample here, so a zero-variance point
        // needs a rounding allowance rather than a statistical one.
        (mean <= 3.0 * ci + 1e-12, mean)
    });
    let passes = results.iter().filter(|r| r.0).count() as u64;
    let worst = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    OracleReport::deterministic(
        "linearizable-nn",
        points,
        passes,
        json!({ "d": d, "samples_per_point": mc, "max_mean_paired_difference": worst }),
    )
}

/// Population losses checked for midpoint convexity.
pub fn convexity_probes() -> Vec<(&'static str, usize, PopSpec)> {
    vec![
        ("fa", 8, PopSpec::Fa { delta: 0.1, p: 0.5, a: 2 }),
        ("fb", 5, PopSpec::Fb { delta: 0.1, v: 1 }),
        ("general-lb-d1", 4, PopSpec::GeneralLb { which: GeneralLb::D1, c_n: 0.2, j_tilde: 1 }),
        ("kink", 1, PopSpec::Kink { n: 16 }),
        ("drift", 1, PopSpec::Drift { n: 64 }),
        ("fc", 8 + 2 + 6, PopSpec::Fc { n: 8, k: 4, j_star: 1 }),
    ]
}

/// `F((a + b)/2) ≤ (F(a) + F(b))/2` on random pairs, exactly enumerated
/// population losses only.
pub fn oracle_convexity(name: &str, dim: usize, spec: &PopSpec, pairs: u64, seed: u64) -> Result<OracleReport> {
    let opts = PopOptions::default();
    let tag = 32 + name.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64)) % 1024;
    let results = chunked(seed, tag, pairs, |rng, _| -> Result<(bool, f64)> {
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fa = spec.value(&a, &opts)?.mean;
        let fb = spec.value(&b, &opts)?.mean;
        let fm = spec.value(&mid, &opts)?.mean;
        let gap = fm - 0.5 * (fa + fb);
        Ok((gap <= 1e-12 * (1.0 + fa.abs() + fb.abs()), gap))
    });
    let results: Vec<(bool, f64)> = results.into_iter().collect::<Result<_>>()?;
    let passes = results.iter().filter(|r| r.0).count() as u64;
    let worst = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleReport::deterministic(
        &format!("convexity/{name}"),
        pairs,
        passes,
        json!({ "dim": dim, "max_midpoint_gap": worst }),
    ))
}

/// Losses checked against central finite differences, with their sampling
/// distributions.
pub fn fd_probes() -> Vec<(&'static str, LossSpec, DistSpec)> {
    vec![
        ("fa", LossSpec::Fa { d: 6 }, DistSpec::D { delta: 0.1, p: 0.5, a: 2, d: 6 }),
        ("fb", LossSpec::Fb { d: 5, c_n: 0.2 }, DistSpec::Dbar { delta: 0.1, c_n: 0.2, v: 1, d: 5 }),
        ("fn", LossSpec::Fn { n: 4 }, DistSpec::Drift),
        ("fc", LossSpec::Fc { n: 4, k: 3, d: 4 }, DistSpec::C { k: 3, d: 4, j_star: 1 }),
        ("kink", LossSpec::Kink { n: 16 }, DistSpec::Kink { n: 16 }),
        ("drift", LossSpec::Drift { n: 16 }, DistSpec::Drift),
        ("nn", LossSpec::Nn { d: 5 }, DistSpec::NN { d: 5 }),
        (
            "sum",
            sum_combine(vec![LossSpec::Drift { n: 16 }, LossSpec::Kink { n: 16 }, LossSpec::Fa { d: 3 }]),
            DistSpec::Product(vec![DistSpec::Drift, DistSpec::Kink { n: 16 }, DistSpec::D { delta: 0.1, p: 0.5, a: 1, d: 3 }]),
        ),
    ]
}

fn fd_point<R: Rng + ?Sized>(loss: &LossSpec, z: &Sample, rng: &mut R) -> Vec<f64> {
    match (loss, z) {
        (LossSpec::Kink { n }, Sample::Kink(s)) => {
            let big_n = n_pow_5_4(*n);
            if rng.gen::<bool>() {
                vec![s.beta + rng.gen_range(-1.0..2.0) / (16.0 * big_n)]
            } else {
                vec![rng.gen_range(-0.2..1.2)]
            }
        }
        (LossSpec::Fc { n, .. }, _) => {
            let mut w: Vec<f64> = (0..loss.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            w[0] = rng.gen_range(-0.2..1.2);
            if rng.gen::<bool>() {
                // Near the optimum, where the block loss is flattest.
                let opt = fc_optimum(*n, loss.dim() - n - 2, 1);
                for (a, b) in w.iter_mut().zip(&opt) {
                    *a = b + 0.1 * *a;
                }
            }
            w
        }
        _ => (0..loss.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

/// Central differences with step `1e-6` at points at least `1e-4` away from
/// every kink; passes when `‖fd − g‖ ≤ 1e-5 · max(‖g‖, 1)`.
pub fn oracle_grad_fd(name: &str, loss: &LossSpec, dist_spec: &DistSpec, points: u64, seed: u64) -> OracleReport {
    let h = 1e-6;
    let tag = 2048 + name.bytes().fold(0u64, |a, b| a.wrapping_mul(31).wrapping_add(b as u64)) % 1024;
    let results = chunked(seed, tag, points, |rng, _| {
        let z = dist_spec.sample(rng);
        let w = fd_point(loss, &z, rng);
        if loss.smooth_margin(&w, &z) < 1e-4 {
            return None;
        }
        let g = loss.eval(&w, &z).ok()?.subgrad;
        let mut fd = vec![0.0; w.len()];
        let mut p = w.clone();
        for i in 0..w.len() {
            p[i] = w[i] + h;
            let up = loss.value(&p, &z);
            p[i] = w[i] - h;
            let down = loss.value(&p, &z);
            p[i] = w[i];
            fd[i] = (up - down) / (2.0 * h);
        }
        let err = dist(&fd, &g) / norm(&g).max(1.0);
        Some(err)
    });
    let checked: Vec<f64> = results.into_iter().flatten().collect();
    let passes = checked.iter().filter(|&&e| e <= 1e-5).count() as u64;
    let worst = checked.iter().fold(0.0f64, |m, &e| m.max(e));
    OracleReport::deterministic(
        &format!("grad-fd/{name}"),
        checked.len() as u64,
        passes,
        json!({ "step": h, "margin": 1e-4, "points_drawn": points, "max_relative_error": worst }),
    )
}

/// Oracle ids accepted by [`run_oracle`], in `all` order.
pub const ORACLE_IDS: [&str; 8] = [
    "bounded-iterates",
    "lipschitz-fb",
    "kink-variance",
    "minimizer-bound",
    "balls-and-bins",
    "linearizable-nn",
    "convexity",
    "grad-fd",
];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fuzz_trials: u64,
    pub variance_n: usize,
    pub variance_samples: u64,
    pub minimizer_grid: usize,
    pub bins_n: usize,
    pub bins_trials: u64,
    pub linearizable_d: usize,
    pub linearizable_points: u64,
    pub linearizable_samples: usize,
    pub convexity_pairs: u64,
    pub fd_points: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            fuzz_trials: 100_000,
            variance_n: 64,
            variance_samples: 1_000_000,
            minimizer_grid: 2000,
            bins_n: 4096,
            bins_trials: 2000,
            linearizable_d: 32,
            linearizable_points: 1000,
            linearizable_samples: 2000,
            convexity_pairs: 10_000,
            fd_points: 2000,
        }
    }
}

/// Runs one oracle family; `convexity` and `grad-fd` yield one report per
/// probed loss.
pub fn run_oracle(id: &str, o: &VerifyOptions) -> Result<Vec<OracleReport>> {
    Ok(match id {
        "bounded-iterates" => vec![oracle_bounded_iterates(o.fuzz_trials, o.seed)],
        "lipschitz-fb" => vec![oracle_lipschitz_fb(o.fuzz_trials, o.seed)],
        "kink-variance" => vec![oracle_variance_kink(o.variance_n, o.variance_samples, o.seed)],
        "minimizer-bound" => vec![oracle_minimizer_bound(o.minimizer_grid, o.seed)],
        "balls-and-bins" => vec![oracle_balls_and_bins(o.bins_n, o.bins_trials, o.seed)],
        "linearizable-nn" => vec![oracle_linearizable_nn(
            o.linearizable_d,
            o.linearizable_points,
            o.linearizable_samples,
            o.seed,
        )],
        "convexity" => convexity_probes()
            .iter()
            .map(|(name, dim, spec)| oracle_convexity(name, *dim, spec, o.convexity_pairs, o.seed))
            .collect::<Result<_>>()?,
        "grad-fd" => fd_probes()
            .iter()
            .map(|(name, loss, d)| oracle_grad_fd(name, loss, d, o.fd_points, o.seed))
            .collect(),
        _ => return Err(Error::Configuration(format!("unknown oracle `{id}`"))),
    })
}

pub fn run_all(o: &VerifyOptions) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for id in ORACLE_IDS {
        out.extend(run_oracle(id, o)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyOptions {
        VerifyOptions {
            fuzz_trials: 3000,
            variance_samples: 20_000,
            minimizer_grid: 200,
            bins_trials: 300,
            linearizable_points: 20,
            linearizable_samples: 500,
            convexity_pairs: 500,
            fd_points: 300,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn fuzz_oracles_pass() {
        assert_eq!(oracle_bounded_iterates(3000, 1).verdict, Verdict::Pass);
        assert_eq!(oracle_lipschitz_fb(3000, 1).verdict, Verdict::Pass);
    }

    #[test]
    fn kink_variance_is_zero_away_from_kinks() {
        let r = oracle_variance_kink(64, 20_000, 3);
        let pts = r.details["points"].as_array().unwrap();
        assert_eq!(pts[0]["variance"].as_f64().unwrap(), 0.0);
        assert_eq!(pts[2]["variance"].as_f64().unwrap(), 0.0);
        let inside = pts[1]["variance"].as_f64().unwrap();
        assert!((inside - 0.25).abs() < 0.05, "{inside}");
    }

    #[test]
    fn minimizer_bound_holds() {
        let r = oracle_minimizer_bound(200, 2);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.details["excess_2e1_over_origin"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn degenerate_bins_are_inconclusive() {
        assert_eq!(oracle_balls_and_bins(1, 100, 0).verdict, Verdict::Inconclusive);
        assert_eq!(balls_and_bins_window(4096), 1);
        let r = oracle_balls_and_bins(4096, 10, 0);
        assert!((r.threshold - 0.70).abs() < 1e-12);
    }

    #[test]
    fn structural_oracles_pass_at_small_scale() {
        let o = small();
        for id in ["linearizable-nn", "convexity", "grad-fd"] {
            for r in run_oracle(id, &o).unwrap() {
                assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
                assert!(r.trials > 0);
            }
        }
    }

    #[test]
    fn drift_population_is_linear_on_a_half_line() {
        let spec = PopSpec::Drift { n: 64 };
        let o = PopOptions::default();
        let (a, b) = (0.3, 1.7);
        let mid = spec.value(&[0.5 * (a + b)], &o).unwrap().mean;
        let avg = 0.5 * (spec.value(&[a], &o).unwrap().mean + spec.value(&[b], &o).unwrap().mean);
        assert!((mid - avg).abs() <= 1e-12);
    }

    #[test]
    fn reports_are_reproducible() {
        let o = small();
        let a = serde_json::to_string(&run_oracle("grad-fd", &o).unwrap()).unwrap();
        let b = serde_json::to_string(&run_oracle("grad-fd", &o).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(run_oracle("nope", &o).is_err());
        let table = format_table(&run_oracle("bounded-iterates", &o).unwrap());
        assert!(table.lines().nth(1).unwrap().starts_with("bounded-iterates"));
    }
}
