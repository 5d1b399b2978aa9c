//! Population risk `F(w)`, its infimum and excess risk: closed forms where
//! they exist, exact enumeration or Monte Carlo otherwise.

use serde::{Deserialize, Serialize};

use crate::distributions::{anchor_coord, bernoulli_mask, GeneralLb};
use crate::error::{check_len, Error, Result};
use crate::losses::{fc_shift, fc_split, fn_eval, fn_min_value};
use crate::rng::{Domain, StreamKey};
use crate::vecspace::{norm_sq, BitMask};

const Z95: f64 = 1.959_963_984_540_054;

/// Monte Carlo chunk size; each chunk has its own stream so results do not
/// depend on how chunks are scheduled.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    /// Closed form or exact finite enumeration; no sampling error.
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub n_samples: usize,
    pub method: Method,
}

impl PopEstimate {
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            half_width_95: 0.0,
            n_samples: 0,
            method: Method::ClosedForm,
        }
    }

    fn shifted(self, by: f64) -> Self {
        Self {
            mean: self.mean + by,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopOptions {
    pub mc_samples: usize,
    /// Supports up to this size are enumerated exactly instead of sampled.
    pub exact_support_limit: usize,
    pub seed: u64,
}

impl Default for PopOptions {
    fn default() -> Self {
        Self {
            mc_samples: 20_000,
            exact_support_limit: 16,
            seed: 0,
        }
    }
}

impl PopOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn monte_carlo_only(seed: u64) -> Self {
        Self {
            exact_support_limit: 0,
            seed,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if self.mc_samples < 100 {
            return Err(Error::Parameter(format!(
                "mc_samples = {} is below the minimum of 100",
                self.mc_samples
            )));
        }
        Ok(())
    }
}

/// Expectation of `g(x)` with `x` a vector of independent Bernoulli(p) bits
/// over `k` coordinates, by enumeration when `k` is small and by sampling
/// otherwise.
fn bernoulli_expectation(k: usize, p: f64, opts: &PopOptions, tag: u64, g: impl Fn(&BitMask) -> f64) -> PopEstimate {
    if k == 0 {
        return PopEstimate::exact(g(&BitMask::zeros(0)));
    }
    if k <= opts.exact_support_limit.min(32) {
        let mut total = 0.0;
        for pattern in 0u64..(1u64 << k) {
            let ones = pattern.count_ones() as i32;
            let weight = p.powi(ones) * (1.0 - p).powi(k as i32 - ones);
            if weight > 0.0 {
                let x = BitMask::from_words(k, vec![pattern]).expect("k ≤ 64");
                total += weight * g(&x);
            }
        }
        return PopEstimate::exact(total);
    }
    let key = StreamKey::with_tag(opts.seed, Domain::MonteCarlo, tag);
    let m = opts.mc_samples;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for chunk in 0..m.div_ceil(CHUNK) {
        let mut rng = key.stream(chunk as u64);
        for _ in 0..CHUNK.min(m - chunk * CHUNK) {
            let v = g(&bernoulli_mask(k, p, &mut rng));
            sum += v;
            sum_sq += v * v;
        }
    }
    let mean = sum / m as f64;
    let var = ((sum_sq - m as f64 * mean * mean) / (m as f64 - 1.0)).max(0.0);
    PopEstimate {
        mean,
        half_width_95: Z95 * (var / m as f64).sqrt(),
        n_samples: m,
        method: Method::MonteCarlo,
    }
}

fn anchor_diff(w: &[f64], a: usize) -> Vec<(usize, f64)> {
    let a = anchor_coord(a);
    w.iter()
        .enumerate()
        .map(|(j, &v)| (j, v - if Some(j) == a { 1.0 } else { 0.0 }))
        .filter(|&(_, r)| r != 0.0)
        .collect()
}

/// Estimate of `F(w) = 2δ E_x‖(w − a) ⊙ x‖` under `D(δ, p, a)`, with the
/// Jensen lower bound `2δp‖w − a‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaPopulation {
    pub estimate: PopEstimate,
    pub jensen_lower_bound: f64,
}

/// Only coordinates where `w` differs from the anchor affect the norm, so the
/// expectation runs over that support alone.
pub fn pop_fa(w: &[f64], delta: f64, p: f64, a: usize, opts: &PopOptions) -> Result<FaPopulation> {
    opts.check()?;
    if a > w.len() {
        return Err(Error::Parameter(format!("anchor {a} exceeds dimension {}", w.len())));
    }
    let support = anchor_diff(w, a);
    let r_sq: Vec<f64> = support.iter().map(|&(_, r)| r * r).collect();
    let jensen = 2.0 * delta * p * r_sq.iter().sum::<f64>().sqrt();
    if support.is_empty() {
        return Ok(FaPopulation {
            estimate: PopEstimate::exact(0.0),
            jensen_lower_bound: 0.0,
        });
    }
    let e = bernoulli_expectation(r_sq.len(), p, opts, 1, |x| x.iter_ones().map(|j| r_sq[j]).sum::<f64>().sqrt());
    Ok(FaPopulation {
        estimate: PopEstimate {
            mean: 2.0 * delta * e.mean,
            half_width_95: 2.0 * delta.abs() * e.half_width_95,
            ..e
        },
        jensen_lower_bound: jensen,
    })
}

/// `(δ/2)‖w − e_v‖² + max{1, ‖w‖⁴}` under `D̄(δ, c_n, v)`.
pub fn pop_fb(w: &[f64], delta: f64, v: usize) -> PopEstimate {
    let diff: f64 = anchor_diff(w, v).iter().map(|&(_, r)| r * r).sum();
    let wsq = norm_sq(w);
    PopEstimate::exact(0.5 * delta * diff + (wsq * wsq).max(1.0))
}

/// Population losses of the two general lower-bound distributions.
pub fn pop_general_lb(w: &[f64], which: GeneralLb, c_n: f64, j_tilde: usize) -> Result<PopEstimate> {
    if j_tilde == 0 || j_tilde > w.len() {
        return Err(Error::Parameter(format!("j_tilde = {j_tilde} out of range")));
    }
    let wsq = norm_sq(w);
    let quartic = (wsq * wsq).max(1.0);
    let coef = 0.5 * (0.5 - c_n);
    Ok(PopEstimate::exact(match which {
        GeneralLb::D1 => coef * wsq + quartic,
        GeneralLb::D2 => {
            let wj = w[j_tilde - 1];
            coef * (wsq - wj * wj) - 0.5 * c_n * wj * wj + quartic
        }
    }))
}

/// `(1/n^{3/8}) max{−w, −1}`.
pub fn pop_kink(w: f64, n: usize) -> PopEstimate {
    PopEstimate::exact((n as f64).powf(-0.375) * (-w).max(-1.0))
}

/// `|w| / (4√n)`.
pub fn pop_drift(w: f64, n: usize) -> PopEstimate {
    PopEstimate::exact(w.abs() / (4.0 * (n as f64).sqrt()))
}

/// `f_N(v) + E f_A(τ) − (2/√(kn)) min{u, 1} + c_1` with blocks drawn from
/// `D(1/10, 1/2, e_{j*})`.
pub fn pop_fc(w: &[f64], n: usize, k: usize, j_star: usize, opts: &PopOptions) -> Result<PopEstimate> {
    if w.len() < n + 2 {
        return Err(Error::Dimension {
            expected: n + 2,
            got: w.len(),
        });
    }
    let (u, v, tau) = fc_split(w, n);
    let fv = fn_eval(v, n)?.value;
    let fa = pop_fa(tau, 0.1, 0.5, j_star, opts)?.estimate;
    let lin = -2.0 / ((k * n) as f64).sqrt() * u.min(1.0);
    Ok(fa.shifted(fv + lin + fc_shift(n, k)))
}

/// Optimal `(u, v, τ) = (1, −𝟙/√(n+1), e_{j*})` of the block loss.
pub fn fc_optimum(n: usize, d: usize, j_star: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 2 + d];
    w[0] = 1.0;
    let c = -1.0 / ((n + 1) as f64).sqrt();
    w[1..n + 2].iter_mut().for_each(|x| *x = c);
    if j_star > 0 {
        w[n + 1 + j_star] = 1.0;
    }
    w
}

/// `E_x[(3/4)|h| + (1/4)|1 − h|]` for `x` uniform on `{0,1}^d`,
/// `y ~ Bern(1/4)`. Only coordinates with `w1_i > 0` and `w2_i ≠ 0` can move
/// the output, so the expectation runs over those.
pub fn pop_nn(w: &[f64], opts: &PopOptions) -> Result<PopEstimate> {
    opts.check()?;
    if w.len() % 2 != 0 {
        return Err(Error::Parameter("network weights must have even length".into()));
    }
    let d = w.len() / 2;
    let (w1, w2) = w.split_at(d);
    let active: Vec<f64> = (0..d).filter(|&i| w1[i] > 0.0 && w2[i] != 0.0).map(|i| w1[i] * w2[i]).collect();
    Ok(bernoulli_expectation(active.len(), 0.5, opts, 2, |x| {
        let pre: f64 = x.iter_ones().map(|j| active[j]).sum();
        let h = pre.max(0.0);
        0.75 * h + 0.25 * (1.0 - h).abs()
    }))
}

/// A population loss whose infimum is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PopSpec {
    Fa { delta: f64, p: f64, a: usize },
    Fb { delta: f64, v: usize },
    GeneralLb { which: GeneralLb, c_n: f64, j_tilde: usize },
    Kink { n: usize },
    Drift { n: usize },
    Fc { n: usize, k: usize, j_star: usize },
    Nn,
    /// Independent components on consecutive slices of the given widths.
    Sum(Vec<(usize, PopSpec)>),
    /// A population loss evaluated elsewhere; `f_star` may be unknown.
    External { f_star: Option<f64> },
}

impl PopSpec {
    pub fn value(&self, w: &[f64], opts: &PopOptions) -> Result<PopEstimate> {
        match self {
            PopSpec::Fa { delta, p, a } => Ok(pop_fa(w, *delta, *p, *a, opts)?.estimate),
            PopSpec::Fb { delta, v } => Ok(pop_fb(w, *delta, *v)),
            PopSpec::GeneralLb { which, c_n, j_tilde } => pop_general_lb(w, *which, *c_n, *j_tilde),
            PopSpec::Kink { n } => {
                check_len(1, w.len())?;
                Ok(pop_kink(w[0], *n))
            }
            PopSpec::Drift { n } => {
                check_len(1, w.len())?;
                Ok(pop_drift(w[0], *n))
            }
            PopSpec::Fc { n, k, j_star } => pop_fc(w, *n, *k, *j_star, opts),
            PopSpec::Nn => pop_nn(w, opts),
            PopSpec::Sum(parts) => {
                check_len(parts.iter().map(|p| p.0).sum(), w.len())?;
                let mut off = 0;
                let mut mean = 0.0;
                let mut hw_sq = 0.0;
                let mut samples = 0;
                let mut method = Method::ClosedForm;
                for (width, spec) in parts {
                    let e = spec.value(&w[off..off + width], opts)?;
                    mean += e.mean;
                    hw_sq += e.half_width_95 * e.half_width_95;
                    samples = samples.max(e.n_samples);
                    if e.method == Method::MonteCarlo {
                        method = Method::MonteCarlo;
                    }
                    off += width;
                }
                Ok(PopEstimate {
                    mean,
                    half_width_95: hw_sq.sqrt(),
                    n_samples: samples,
                    method,
                })
            }
            PopSpec::External { .. } => Err(Error::Configuration(
                "external population losses cannot be evaluated here".into(),
            )),
        }
    }

    /// `inf_w F(w)`.
    pub fn f_star(&self) -> Result<f64> {
        match self {
            PopSpec::Fa { .. } | PopSpec::Drift { .. } | PopSpec::Fc { .. } => Ok(0.0),
            PopSpec::Fb { .. } => Ok(1.0),
            PopSpec::GeneralLb { which, c_n, .. } => Ok(match which {
                GeneralLb::D1 => 1.0,
                GeneralLb::D2 => 1.0 - 0.5 * c_n,
            }),
            PopSpec::Kink { n } => Ok(-(*n as f64).powf(-0.375)),
            PopSpec::Nn => Ok(0.25),
            PopSpec::Sum(parts) => parts.iter().map(|(_, s)| s.f_star()).sum(),
            PopSpec::External { f_star } => {
                f_star.ok_or_else(|| Error::Configuration("population infimum is unknown".into()))
            }
        }
    }
}

/// `F(w) − F*` with the estimate's confidence interval.
pub fn excess(w: &[f64], spec: &PopSpec, opts: &PopOptions) -> Result<PopEstimate> {
    let f_star = spec.f_star()?;
    Ok(spec.value(w, opts)?.shifted(-f_star))
}

/// The block loss's `v`-part has a known minimum; exposed for reports.
pub fn fn_excess(v: &[f64], n: usize) -> Result<f64> {
    Ok(fn_eval(v, n)?.value - fn_min_value(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fa_population() {
        let opts = PopOptions::default();
        let r = pop_fa(&[0.0, 1.0], 0.1, 0.5, 2, &opts).unwrap();
        assert_eq!(r.estimate, PopEstimate::exact(0.0));
        // d = 1, w − a = (1): 2δ·E|x| = 0.2·0.5.
        let r = pop_fa(&[1.0], 0.1, 0.5, 0, &opts).unwrap();
        assert_eq!(r.estimate.mean, 0.1);
        let mc = pop_fa(&[1.0], 0.1, 0.5, 0, &PopOptions::monte_carlo_only(3)).unwrap();
        assert_eq!(mc.estimate.method, Method::MonteCarlo);
        assert!((mc.estimate.mean - 0.1).abs() <= mc.estimate.half_width_95 * 1.5);
        assert!(pop_fa(&[1.0], 0.1, 0.5, 0, &PopOptions { mc_samples: 50, ..opts }).is_err());
    }

    #[test]
    fn fa_estimate_dominates_jensen_bound() {
        let mut rng = StreamKey::new(5, Domain::Oracle).stream(0);
        for case in 0..200 {
            let d = rng.gen_range(1..30);
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let opts = PopOptions {
                mc_samples: 2000,
                seed: case,
                ..PopOptions::default()
            };
            let r = pop_fa(&w, 0.1, 0.5, 1, &opts).unwrap();
            assert!(r.estimate.mean >= r.jensen_lower_bound - r.estimate.half_width_95 - 1e-12);
        }
    }

    #[test]
    fn fb_population() {
        let d = 0.1;
        assert_eq!(pop_fb(&[0.0, 1.0, 0.0], d, 2).mean, 1.0);
        assert_eq!(pop_fb(&[0.0, 0.0, 0.0], d, 2).mean, d / 2.0 + 1.0);
        assert_eq!(pop_fb(&[0.0, 2.0, 0.0], d, 2).mean, d / 2.0 + 16.0);
        let spec = PopSpec::Fb { delta: d, v: 2 };
        let e = excess(&[0.0; 3], &spec, &PopOptions::default()).unwrap();
        assert!((e.mean - d / 2.0).abs() < 1e-15);
    }

    #[test]
    fn general_lb_population() {
        let c = 0.2;
        assert_eq!(pop_general_lb(&[0.0; 4], GeneralLb::D1, c, 2).unwrap().mean, 1.0);
        let e = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(pop_general_lb(&e, GeneralLb::D2, c, 2).unwrap().mean, 1.0 - c / 2.0);
        let spec = PopSpec::GeneralLb { which: GeneralLb::D2, c_n: c, j_tilde: 2 };
        assert_eq!(spec.f_star().unwrap(), 1.0 - c / 2.0);
        for t in [0.0, 0.3, 0.9, 1.1, 2.0] {
            let w = [0.0, t, 0.0, 0.0];
            assert!(pop_general_lb(&w, GeneralLb::D2, c, 2).unwrap().mean >= 1.0 - c / 2.0);
        }
    }

    #[test]
    fn kink_drift_fc_nn_population() {
        for n in [16, 4096] {
            assert_eq!(pop_kink(1.0, n).mean, -(n as f64).powf(-0.375));
            assert_eq!(pop_kink(1.0, n).mean, PopSpec::Kink { n }.f_star().unwrap());
        }
        assert_eq!(pop_drift(-2.0, 16).mean, 0.125);
        let (n, k, d) = (64, 4, 10);
        let opt = fc_optimum(n, d, 3);
        let v = pop_fc(&opt, n, k, 3, &PopOptions::default()).unwrap();
        assert!(v.mean.abs() < 1e-12, "{v:?}");
        let w0 = vec![0.0; 2 * 50];
        let f0 = pop_nn(&w0, &PopOptions::default()).unwrap();
        assert_eq!(f0.mean, 0.25);
        let mut w = vec![0.0; 2 * 50];
        w[7] = 1.0;
        w[57] = 1.0;
        assert_eq!(pop_nn(&w, &PopOptions::default()).unwrap().mean, 0.5);
        let mc = pop_nn(&w, &PopOptions::monte_carlo_only(1)).unwrap();
        assert!((mc.mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn unknown_infimum_is_a_configuration_error() {
        let spec = PopSpec::External { f_star: None };
        assert!(matches!(spec.f_star(), Err(Error::Configuration(_))));
        assert_eq!(PopSpec::External { f_star: Some(2.0) }.f_star().unwrap(), 2.0);
    }

    #[test]
    fn doubling_samples_shrinks_the_interval() {
        let w: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        for seed in 0..5 {
            let a = PopOptions { mc_samples: 20_000, exact_support_limit: 0, seed };
            let b = PopOptions { mc_samples: 40_000, ..a };
            let ha = pop_fa(&w, 0.1, 0.5, 0, &a).unwrap().estimate.half_width_95;
            let hb = pop_fa(&w, 0.1, 0.5, 0, &b).unwrap().estimate.half_width_95;
            let ratio = ha / hb;
            assert!((1.3..=1.5).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn estimates_are_reproducible() {
        let w: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
        let o = PopOptions::monte_carlo_only(9);
        assert_eq!(pop_fa(&w, 0.1, 0.5, 0, &o).unwrap(), pop_fa(&w, 0.1, 0.5, 0, &o).unwrap());
    }
}
