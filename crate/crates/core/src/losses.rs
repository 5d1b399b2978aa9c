//! Values and subgradients of every stochastic loss, with the subgradient
//! selection fixed at each nondifferentiable point, plus the sum and grid
//! combinators.
//!
//! Conventions: `sign(0) = 0`; when a max or min ties, the inactive branch
//! wins, so the quartic term has zero gradient at ‖w‖ = 1, the kink loss at
//! w = 1 and the linear u-term of the block loss at u = 1.

use serde::{Deserialize, Serialize};

use crate::distributions::{anchor_coord, Sample, SampleA, SampleB, SampleC, SampleKink, SampleNN};
use crate::error::{check_len, Error, Result};
use crate::vecspace::{argmax_coord, norm_sq};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub subgrad: Vec<f64>,
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One component of a sum, living on `w[offset .. offset + spec.dim()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumPart {
    pub offset: usize,
    pub spec: LossSpec,
}

/// Components indexed by a (step size, horizon) grid, mixed with weight 1/M
/// and evaluated at the rescaled point `w · ln n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub etas: Vec<f64>,
    pub horizons: Vec<u64>,
    /// Row-major over `etas × horizons`, each on its own contiguous slice.
    pub components: Vec<LossSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    /// `y ‖(w − α) ⊙ x‖`
    Fa { d: usize },
    /// Quadratic-minus-quadratic plus `max{1, ‖w‖⁴}`.
    Fb { d: usize, c_n: f64 },
    /// Nesterov's worst-case function on `n + 1` coordinates.
    Fn { n: usize },
    /// Block loss on `(u, v, τ)` with `k` blocks.
    Fc { n: usize, k: usize, d: usize },
    Kink { n: usize },
    Drift { n: usize },
    /// Diagonal two-layer ReLU network with absolute loss; `w = (w1, w2)`.
    Nn { d: usize },
    Sum { dim: usize, parts: Vec<SumPart> },
    Grid(GridSpec),
}

/// `c_n = n^{−(1/4 − γ)}`.
pub fn c_n_from_gamma(n: usize, gamma: f64) -> f64 {
    (n as f64).powf(-(0.25 - gamma))
}

impl LossSpec {
    pub fn fb(d: usize, c_n: f64) -> Result<Self> {
        if !(c_n <= 0.25) || !c_n.is_finite() {
            return Err(Error::Parameter(format!("c_n = {c_n} exceeds 1/4")));
        }
        Ok(LossSpec::Fb { d, c_n })
    }

    /// Quartic loss with `c_n` derived from the sample size and `γ`.
    pub fn fb_from_gamma(d: usize, n: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("gamma = {gamma} must be positive")));
        }
        Self::fb(d, c_n_from_gamma(n, gamma))
    }

    pub fn dim(&self) -> usize {
        match self {
            LossSpec::Fa { d } | LossSpec::Fb { d, .. } => *d,
            LossSpec::Fn { n } => n + 1,
            LossSpec::Fc { n, d, .. } => 1 + (n + 1) + d,
            LossSpec::Kink { .. } | LossSpec::Drift { .. } => 1,
            LossSpec::Nn { d } => 2 * d,
            LossSpec::Sum { dim, .. } => *dim,
            LossSpec::Grid(g) => g.components.iter().map(|c| c.dim()).sum(),
        }
    }

    /// Checks that `z` has the shape this loss consumes.
    pub fn check_sample(&self, z: &Sample) -> Result<()> {
        let bad = |what: &str| Err(Error::Configuration(format!("{what} loss got an incompatible sample")));
        match (self, z) {
            (LossSpec::Fa { d }, Sample::A(a)) => check_len(*d, a.x.len()),
            (LossSpec::Fb { d, .. }, Sample::B(b)) => check_len(*d, b.x.len()),
            (LossSpec::Fn { .. }, _) => Ok(()),
            (LossSpec::Fc { k, d, .. }, Sample::C(c)) => {
                check_len(*k, c.blocks.len())?;
                c.blocks.iter().try_for_each(|b| check_len(*d, b.x.len()))
            }
            (LossSpec::Kink { .. }, Sample::Kink(_)) | (LossSpec::Drift { .. }, Sample::Drift(_)) => Ok(()),
            (LossSpec::Nn { d }, Sample::NN(s)) => check_len(*d, s.x.len()),
            (LossSpec::Sum { parts, .. }, Sample::Tuple(zs)) => {
                check_len(parts.len(), zs.len())?;
                parts.iter().zip(zs).try_for_each(|(p, z)| p.spec.check_sample(z))
            }
            (LossSpec::Grid(g), Sample::Tuple(zs)) => {
                check_len(g.components.len(), zs.len())?;
                g.components.iter().zip(zs).try_for_each(|(c, z)| c.check_sample(z))
            }
            (LossSpec::Fa { .. }, _) => bad("f_A"),
            (LossSpec::Fb { .. }, _) => bad("f_B"),
            (LossSpec::Fc { .. }, _) => bad("block"),
            (LossSpec::Kink { .. }, _) => bad("kink"),
            (LossSpec::Drift { .. }, _) => bad("drift"),
            (LossSpec::Nn { .. }, _) => bad("network"),
            (LossSpec::Sum { .. }, _) | (LossSpec::Grid(_), _) => bad("combined"),
        }
    }

    /// Value and subgradient at `w`.
    pub fn eval(&self, w: &[f64], z: &Sample) -> Result<EvalResult> {
        check_len(self.dim(), w.len())?;
        self.check_sample(z)?;
        let mut subgrad = vec![0.0; w.len()];
        let value = self.accumulate(w, z, 1.0, &mut subgrad);
        Ok(EvalResult { value, subgrad })
    }

    /// Returns `f(w; z)` and adds `weight · ∂f(w; z)` into `grad`.
    /// Shapes are assumed checked.
    pub fn accumulate(&self, w: &[f64], z: &Sample, weight: f64, grad: &mut [f64]) -> f64 {
        match (self, z) {
            (LossSpec::Fa { .. }, Sample::A(a)) => fa_accumulate(w, a, weight, grad),
            (LossSpec::Fb { c_n, .. }, Sample::B(b)) => fb_accumulate(w, b, *c_n, weight, grad),
            (LossSpec::Fn { .. }, _) => fn_accumulate(w, weight, grad),
            (LossSpec::Fc { n, k, .. }, Sample::C(c)) => fc_accumulate(w, c, *n, *k, weight, grad),
            (LossSpec::Kink { n }, Sample::Kink(s)) => {
                let (v, g) = kink_loss(w[0], s, *n);
                grad[0] += weight * g;
                v
            }
            (LossSpec::Drift { n }, Sample::Drift(s)) => {
                let (v, g) = drift(w[0], s.z, *n);
                grad[0] += weight * g;
                v
            }
            (LossSpec::Nn { .. }, Sample::NN(s)) => nn_accumulate(w, s, weight, grad),
            (LossSpec::Sum { parts, .. }, Sample::Tuple(zs)) => parts
                .iter()
                .zip(zs)
                .map(|(p, z)| {
                    let r = p.offset..p.offset + p.spec.dim();
                    p.spec.accumulate(&w[r.clone()], z, weight, &mut grad[r])
                })
                .sum(),
            (LossSpec::Grid(g), Sample::Tuple(zs)) => g.accumulate(w, zs, weight, grad),
            _ => panic!("sample kind does not match loss kind; call check_sample first"),
        }
    }

    pub fn value(&self, w: &[f64], z: &Sample) -> f64 {
        match (self, z) {
            (LossSpec::Fa { .. }, Sample::A(a)) => fa_value(w, a),
            (LossSpec::Kink { n }, Sample::Kink(s)) => kink_loss(w[0], s, *n).0,
            (LossSpec::Drift { n }, Sample::Drift(s)) => drift(w[0], s.z, *n).0,
            _ => {
                let mut scratch = vec![0.0; w.len()];
                self.accumulate(w, z, 1.0, &mut scratch)
            }
        }
    }

    /// A lower bound on the distance from `w` to the set where `f(·; z)` is
    /// not differentiable (a value-scale margin for the network loss).
    pub fn smooth_margin(&self, w: &[f64], z: &Sample) -> f64 {
        match (self, z) {
            (LossSpec::Fa { .. }, Sample::A(a)) => fa_masked_norm_sq(w, a).sqrt(),
            (LossSpec::Fb { .. }, _) => (norm_sq(w).sqrt() - 1.0).abs(),
            (LossSpec::Fn { .. }, _) => fn_margin(w),
            (LossSpec::Fc { n, k, .. }, Sample::C(c)) => {
                let (u, v, tau) = fc_split(w, *n);
                let s = fc_active_block(u, *k);
                let mut m = fn_margin(v).min(fa_masked_norm_sq(tau, &c.blocks[s - 1]).sqrt());
                m = m.min((u - 1.0).abs());
                for b in 1..*k {
                    m = m.min((u - b as f64 / *k as f64).abs());
                }
                m
            }
            (LossSpec::Kink { n }, Sample::Kink(s)) => {
                let big_n = crate::distributions::n_pow_5_4(*n);
                let r = w[0] - s.beta;
                [0.0, 1.0 / (64.0 * big_n), 3.0 / (64.0 * big_n), 1.0 / (16.0 * big_n)]
                    .iter()
                    .map(|b| (r - b).abs())
                    .fold((w[0] - 1.0).abs(), f64::min)
            }
            (LossSpec::Drift { .. }, _) => w[0].abs(),
            (LossSpec::Nn { d }, Sample::NN(s)) => {
                let (w1, w2) = w.split_at(*d);
                let pre = nn_pre(w1, w2, &s.x);
                let h = pre.max(0.0);
                let mut m = pre.abs().min((s.y as f64 - h).abs());
                for i in s.x.iter_ones() {
                    m = m.min(w1[i].abs());
                }
                m
            }
            (LossSpec::Sum { parts, .. }, Sample::Tuple(zs)) => parts
                .iter()
                .zip(zs)
                .map(|(p, z)| p.spec.smooth_margin(&w[p.offset..p.offset + p.spec.dim()], z))
                .fold(f64::INFINITY, f64::min),
            (LossSpec::Grid(g), Sample::Tuple(zs)) => {
                let scale = g.rescale();
                let mut off = 0;
                let mut m = f64::INFINITY;
                for (c, z) in g.components.iter().zip(zs) {
                    let wb: Vec<f64> = w[off..off + c.dim()].iter().map(|v| v * scale).collect();
                    m = m.min(c.smooth_margin(&wb, z) / scale);
                    off += c.dim();
                }
                m
            }
            _ => 0.0,
        }
    }
}

fn fa_masked_norm_sq(w: &[f64], z: &SampleA) -> f64 {
    let a = anchor_coord(z.alpha);
    z.x.iter_ones()
        .map(|j| {
            let r = w[j] - if Some(j) == a { 1.0 } else { 0.0 };
            r * r
        })
        .sum()
}

fn fa_value(w: &[f64], z: &SampleA) -> f64 {
    z.y as f64 * fa_masked_norm_sq(w, z).sqrt()
}

fn fa_accumulate(w: &[f64], z: &SampleA, weight: f64, grad: &mut [f64]) -> f64 {
    let nrm = fa_masked_norm_sq(w, z).sqrt();
    if nrm == 0.0 {
        return 0.0;
    }
    let y = z.y as f64;
    let a = anchor_coord(z.alpha);
    let scale = weight * y / nrm;
    for j in z.x.iter_ones() {
        let r = w[j] - if Some(j) == a { 1.0 } else { 0.0 };
        grad[j] += scale * r;
    }
    y * nrm
}

/// `f_A(w; z) = y ‖(w − α) ⊙ x‖`; zero subgradient where the masked
/// difference vanishes.
pub fn fa_eval(w: &[f64], z: &SampleA) -> Result<EvalResult> {
    LossSpec::Fa { d: w.len() }.eval(w, &Sample::A(z.clone()))
}

fn fb_accumulate(w: &[f64], z: &SampleB, c_n: f64, weight: f64, grad: &mut [f64]) -> f64 {
    let a = anchor_coord(z.alpha);
    let mut masked = 0.0;
    let mut full = 0.0;
    for (j, &wj) in w.iter().enumerate() {
        let r = wj - if Some(j) == a { 1.0 } else { 0.0 };
        full += r * r;
        let xj = z.x.get(j);
        if xj {
            masked += r * r;
        }
        grad[j] += weight * (if xj { r } else { 0.0 } - c_n * r);
    }
    let wsq = norm_sq(w);
    let quartic = wsq * wsq;
    if wsq.sqrt() > 1.0 {
        for (g, &wj) in grad.iter_mut().zip(w) {
            *g += weight * 4.0 * wsq * wj;
        }
    }
    0.5 * masked - 0.5 * c_n * full + quartic.max(1.0)
}

/// `½‖(w−α)⊙x‖² − (c_n/2)‖w−α‖² + max{1, ‖w‖⁴}`.
pub fn fb_eval(w: &[f64], z: &SampleB, c_n: f64) -> Result<EvalResult> {
    LossSpec::fb(w.len(), c_n)?.eval(w, &Sample::B(z.clone()))
}

fn fn_coeffs(len: usize) -> (f64, f64) {
    let r = (len as f64).sqrt();
    (r / (1.0 + r), 1.0 / (2.0 + 2.0 * r))
}

fn fn_accumulate(v: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
    let (lin, quad) = fn_coeffs(v.len());
    let i = argmax_coord(v).expect("f_N needs at least one coordinate");
    grad[i] += weight * lin;
    for (g, &vj) in grad.iter_mut().zip(v) {
        *g += weight * 2.0 * quad * vj;
    }
    lin * v[i] + quad * norm_sq(v)
}

fn fn_margin(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::INFINITY;
    }
    let i = argmax_coord(v).unwrap();
    let second = v
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    (v[i] - second) / std::f64::consts::SQRT_2
}

/// `f_N(v) = (√(n+1)/(1+√(n+1))) max_i v_i + ‖v‖²/(2+2√(n+1))`.
pub fn fn_eval(v: &[f64], n: usize) -> Result<EvalResult> {
    check_len(n + 1, v.len())?;
    let mut subgrad = vec![0.0; v.len()];
    let value = fn_accumulate(v, 1.0, &mut subgrad);
    Ok(EvalResult { value, subgrad })
}

/// Minimum of `f_N` over `R^{n+1}`, attained at `v = −𝟙/√(n+1)`.
pub fn fn_min_value(n: usize) -> f64 {
    -1.0 / (2.0 + 2.0 * ((n + 1) as f64).sqrt())
}

/// 1-based block whose interval contains `u`: `I_1 = (−∞, 1/k]`,
/// `I_s = ((s−1)/k, s/k]`, `I_k = ((k−1)/k, ∞)`.
pub fn fc_active_block(u: f64, k: usize) -> usize {
    let kf = k as f64;
    let mut s = ((u * kf).ceil().max(1.0) as usize).min(k);
    while s > 1 && u <= (s - 1) as f64 / kf {
        s -= 1;
    }
    while s < k && u > s as f64 / kf {
        s += 1;
    }
    s
}

/// Constant shift making the block loss's population minimum zero.
pub fn fc_shift(n: usize, k: usize) -> f64 {
    2.0 / ((k * n) as f64).sqrt() - fn_min_value(n)
}

pub fn fc_split(w: &[f64], n: usize) -> (f64, &[f64], &[f64]) {
    let (v, tau) = w[1..].split_at(n + 1);
    (w[0], v, tau)
}

fn fc_accumulate(w: &[f64], z: &SampleC, n: usize, k: usize, weight: f64, grad: &mut [f64]) -> f64 {
    let (u, v, tau) = fc_split(w, n);
    let s = fc_active_block(u, k);
    let rate = 2.0 / ((k * n) as f64).sqrt();
    let (gu, rest) = grad.split_at_mut(1);
    let (gv, gtau) = rest.split_at_mut(n + 1);
    let fv = fn_accumulate(v, weight, gv);
    let fa = fa_accumulate(tau, &z.blocks[s - 1], weight, gtau);
    if u < 1.0 {
        gu[0] -= weight * rate;
    }
    fv + fa - rate * u.min(1.0) + fc_shift(n, k)
}

/// Block loss on `w = (u, v, τ)`: only the block whose interval holds `u`
/// contributes its `f_A` term.
pub fn fc_eval(w: &[f64], z: &SampleC, n: usize, k: usize) -> Result<EvalResult> {
    let d = w.len().checked_sub(n + 2).ok_or(Error::Dimension {
        expected: n + 2,
        got: w.len(),
    })?;
    LossSpec::Fc { n, k, d }.eval(w, &Sample::C(z.clone()))
}

/// Kink `h(w)` and the chosen derivative. Cases are matched top to bottom as
/// written, so at `w = 1/(16N)` the fourth branch applies.
pub fn kink_h(w: f64, n: usize) -> (f64, f64) {
    let big_n = crate::distributions::n_pow_5_4(n);
    let a = (n as f64).powf(0.625);
    if w < 0.0 {
        (0.0, 0.0)
    } else if w < 1.0 / (64.0 * big_n) {
        (-a * w, -a)
    } else if w <= 3.0 / (64.0 * big_n) {
        (a * w - 2.0 / (64.0 * a), a)
    } else if w <= 1.0 / (16.0 * big_n) {
        (-a * w + 4.0 / (64.0 * a), -a)
    } else {
        (0.0, 0.0)
    }
}

/// `(1/n^{3/8}) max{−w, −1} + y · h(w − β)`. The kink sits on
/// `[β, β + 1/(16 n^{5/4})]`.
pub fn kink_loss(w: f64, z: &SampleKink, n: usize) -> (f64, f64) {
    let base = (n as f64).powf(-0.375);
    let (h, dh) = kink_h(w - z.beta, n);
    let y = z.y as f64;
    let (v, g) = if w < 1.0 { (-w, -1.0) } else { (-1.0, 0.0) };
    (base * v + y * h, base * g + y * dh)
}

pub fn kink_loss_eval(w: f64, z: &SampleKink, n: usize) -> EvalResult {
    let (value, g) = kink_loss(w, z, n);
    EvalResult {
        value,
        subgrad: vec![g],
    }
}

/// `(1/(4√n) + z)|w|`.
pub fn drift(w: f64, z: i8, n: usize) -> (f64, f64) {
    let c = 1.0 / (4.0 * (n as f64).sqrt()) + z as f64;
    (c * w.abs(), c * sign(w))
}

pub fn drift_eval(w: f64, z: i8, n: usize) -> EvalResult {
    let (value, g) = drift(w, z, n);
    EvalResult {
        value,
        subgrad: vec![g],
    }
}

fn nn_pre(w1: &[f64], w2: &[f64], x: &crate::vecspace::BitMask) -> f64 {
    x.iter_ones().map(|i| w2[i] * w1[i].max(0.0)).sum()
}

/// `relu(w2ᵀ relu(w1 ⊙ x))`.
pub fn diag_forward(w1: &[f64], w2: &[f64], x: &crate::vecspace::BitMask) -> Result<f64> {
    check_len(w1.len(), w2.len())?;
    check_len(w1.len(), x.len())?;
    Ok(nn_pre(w1, w2, x).max(0.0))
}

fn nn_accumulate(w: &[f64], z: &SampleNN, weight: f64, grad: &mut [f64]) -> f64 {
    let d = w.len() / 2;
    let (w1, w2) = w.split_at(d);
    let pre = nn_pre(w1, w2, &z.x);
    let h = pre.max(0.0);
    let y = z.y as f64;
    if pre > 0.0 {
        let s = sign(y - h);
        if s != 0.0 {
            let (g1, g2) = grad.split_at_mut(d);
            for i in z.x.iter_ones() {
                if w1[i] > 0.0 {
                    g1[i] -= weight * s * w2[i];
                    g2[i] -= weight * s * w1[i];
                }
            }
        }
    }
    (y - h).abs()
}

/// `|y − h(w; x)|` for `w = (w1, w2)`.
pub fn nn_eval(w: &[f64], z: &SampleNN) -> Result<EvalResult> {
    if w.len() % 2 != 0 {
        return Err(Error::Dimension {
            expected: 2 * z.x.len(),
            got: w.len(),
        });
    }
    LossSpec::Nn { d: w.len() / 2 }.eval(w, &Sample::NN(z.clone()))
}

/// Places the components on consecutive slices.
pub fn sum_combine(specs: Vec<LossSpec>) -> LossSpec {
    let mut offset = 0;
    let parts = specs
        .into_iter()
        .map(|spec| {
            let p = SumPart { offset, spec };
            offset += p.spec.dim();
            p
        })
        .collect();
    LossSpec::Sum { dim: offset, parts }
}

/// Places components on caller-chosen slices of a `dim`-dimensional variable.
pub fn sum_combine_slices(dim: usize, parts: Vec<SumPart>) -> Result<LossSpec> {
    let mut ranges: Vec<(usize, usize)> = parts.iter().map(|p| (p.offset, p.offset + p.spec.dim())).collect();
    ranges.sort_unstable();
    for r in &ranges {
        if r.1 > dim {
            return Err(Error::Configuration(format!(
                "slice {}..{} exceeds dimension {dim}",
                r.0, r.1
            )));
        }
    }
    for pair in ranges.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(Error::Configuration(format!(
                "slices {}..{} and {}..{} overlap",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            )));
        }
    }
    Ok(LossSpec::Sum { dim, parts })
}

/// Ratio between consecutive step sizes of the grid.
pub const GRID_GAMMA: f64 = 1.224_744_871_391_589; // √(3/2)

/// `{γ^i / n³ : i = 0..⌈3 ln n / ln γ⌉}`.
pub fn grid_etas(n: usize) -> Vec<f64> {
    let ln = (n as f64).ln();
    let top = (3.0 * ln / GRID_GAMMA.ln()).ceil() as i32;
    let base = (n as f64).powi(3);
    (0..=top).map(|i| GRID_GAMMA.powi(i) / base).collect()
}

/// `{2^j : j = 0..⌈3 log₂ n⌉}`.
pub fn grid_horizons(n: usize) -> Vec<u64> {
    let top = (3.0 * (n as f64).log2()).ceil() as u32;
    (0..=top).map(|j| 1u64 << j).collect()
}

impl GridSpec {
    /// Builds one component per `(η, T)` grid point.
    pub fn new(n: usize, mut component: impl FnMut(f64, u64) -> LossSpec) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter("grid combinator needs n ≥ 2".into()));
        }
        let etas = grid_etas(n);
        let horizons = grid_horizons(n);
        let mut components = Vec::with_capacity(etas.len() * horizons.len());
        for &eta in &etas {
            for &t in &horizons {
                components.push(component(eta, t));
            }
        }
        Ok(Self {
            n,
            etas,
            horizons,
            components,
        })
    }

    /// Number of mixed components `|𝒩|·|𝒯|`.
    pub fn m(&self) -> usize {
        self.etas.len() * self.horizons.len()
    }

    pub fn rescale(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// Step size seen by a component's rescaled variable when GD runs on
    /// the mixture with step `eta`: `η · ln²(n) / M`.
    pub fn effective_step(&self, eta: f64) -> f64 {
        eta * self.rescale() * self.rescale() / self.m() as f64
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.components
            .iter()
            .map(|c| {
                let o = off;
                off += c.dim();
                o
            })
            .collect()
    }

    fn accumulate(&self, w: &[f64], zs: &[Sample], weight: f64, grad: &mut [f64]) -> f64 {
        let scale = self.rescale();
        let mix = 1.0 / self.m() as f64;
        let mut off = 0;
        let mut total = 0.0;
        for (c, z) in self.components.iter().zip(zs) {
            let r = off..off + c.dim();
            let wb: Vec<f64> = w[r.clone()].iter().map(|v| v * scale).collect();
            total += c.accumulate(&wb, z, weight * mix * scale, &mut grad[r]);
            off += c.dim();
        }
        mix * total
    }
}

pub fn grid_combine(n: usize, component: impl FnMut(f64, u64) -> LossSpec) -> Result<LossSpec> {
    Ok(LossSpec::Grid(GridSpec::new(n, component)?))
}
