//! Piecewise-linear functions compiled to sums of ReLUs, smooth-function
//! approximation, and small layered networks that reproduce the vector
//! losses exactly.

use serde::{Deserialize, Serialize};

use crate::distributions::{anchor_coord, SampleA, SampleB};
use crate::error::{check_len, Error, Result};

pub use crate::losses::diag_forward;

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// A continuous piecewise-linear function on R with breakpoints
/// `a_1 < … < a_K`; `slopes[i]` is the slope right of `a_i` (`slopes[0]`
/// left of `a_1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub endpoints: Vec<f64>,
    pub value_at_a1: f64,
    pub slopes: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(endpoints: Vec<f64>, value_at_a1: f64, slopes: Vec<f64>) -> Result<Self> {
        let f = Self { endpoints, value_at_a1, slopes };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.endpoints.is_empty() {
            return Err(Error::Validation("at least one endpoint is required".into()));
        }
        check_len(self.endpoints.len() + 1, self.slopes.len())?;
        if let Some(i) = self.endpoints.windows(2).position(|p| !(p[0] < p[1])) {
            return Err(Error::Validation(format!("endpoints not strictly increasing at index {}", i + 1)));
        }
        if !self.endpoints.iter().chain(&self.slopes).all(|v| v.is_finite()) || !self.value_at_a1.is_finite() {
            return Err(Error::Validation("non-finite piecewise-linear data".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = &self.endpoints;
        if x <= a[0] {
            return self.value_at_a1 + self.slopes[0] * (x - a[0]);
        }
        let mut v = self.value_at_a1;
        for i in 0..a.len() {
            let right = a.get(i + 1).copied().unwrap_or(f64::INFINITY);
            if x <= right {
                return v + self.slopes[i + 1] * (x - a[i]);
            }
            v += self.slopes[i + 1] * (right - a[i]);
        }
        unreachable!()
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `relu(x − knot)`
    Plus,
    /// `relu(knot − x)`
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReluTerm {
    pub coefficient: f64,
    pub orientation: Orientation,
    pub knot: f64,
}

impl ReluTerm {
    fn eval(&self, x: f64) -> f64 {
        self.coefficient
            * match self.orientation {
                Orientation::Plus => relu(x - self.knot),
                Orientation::Minus => relu(self.knot - x),
            }
    }

    fn slope(&self, x: f64) -> f64 {
        match self.orientation {
            Orientation::Plus if x > self.knot => self.coefficient,
            Orientation::Minus if x < self.knot => -self.coefficient,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluCombo {
    pub bias: f64,
    pub terms: Vec<ReluTerm>,
}

impl ReluCombo {
    pub fn eval(&self, x: f64) -> f64 {
        self.bias + self.terms.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    /// Derivative away from the knots.
    pub fn slope(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.slope(x)).sum()
    }

    pub fn without_zero_terms(mut self) -> Self {
        self.terms.retain(|t| t.coefficient != 0.0);
        self
    }
}

/// `f(a₁) − m₀ relu(a₁ − x) + m₀ relu(x − a₁) + Σ (m_i − m_{i−1}) relu(x − a_i)`,
/// exactly `K + 2` terms.
pub fn pwl_to_relu(f: &PiecewiseLinear) -> Result<ReluCombo> {
    f.validate()?;
    let a1 = f.endpoints[0];
    let m = &f.slopes;
    let mut terms = vec![
        ReluTerm { coefficient: -m[0], orientation: Orientation::Minus, knot: a1 },
        ReluTerm { coefficient: m[0], orientation: Orientation::Plus, knot: a1 },
    ];
    for (i, &a) in f.endpoints.iter().enumerate() {
        terms.push(ReluTerm {
            coefficient: m[i + 1] - m[i],
            orientation: Orientation::Plus,
            knot: a,
        });
    }
    Ok(ReluCombo { bias: f.value_at_a1, terms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothApprox {
    pub intervals: usize,
    /// `max_i |f′(m_i) − h′(m_i)|` over the interval midpoints `m_i`.
    pub midpoint_slope_error: f64,
    pub interpolant: PiecewiseLinear,
    /// Zero-coefficient terms removed.
    pub combo: ReluCombo,
}

/// Interpolates `f` at `⌈(b − a) max{L, α}/ε⌉ + 1` equispaced points on
/// `[a, b]`, extends linearly outside, and compiles to ReLUs. `L` bounds
/// `|f′|` and `α` bounds `|f″|` on the interval.
pub fn approx_smooth(
    f: impl Fn(f64) -> f64,
    f_prime: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    lipschitz: f64,
    smoothness: f64,
    eps: f64,
) -> Result<SmoothApprox> {
    if !(eps > 0.0) || !(b > a) {
        return Err(Error::Parameter(format!("need eps > 0 and b > a, got eps={eps}, [{a}, {b}]")));
    }
    let intervals = (((b - a) * lipschitz.max(smoothness)) / eps).ceil().max(1.0) as usize;
    let h = (b - a) / intervals as f64;
    let xs: Vec<f64> = (0..=intervals).map(|i| if i == intervals { b } else { a + i as f64 * h }).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let seg: Vec<f64> = (0..intervals).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
    let midpoint_slope_error = seg
        .iter()
        .zip(xs.windows(2))
        .map(|(s, p)| (f_prime(0.5 * (p[0] + p[1])) - s).abs())
        .fold(0.0, f64::max);
    let mut slopes = Vec::with_capacity(intervals + 2);
    slopes.push(seg[0]);
    slopes.extend_from_slice(&seg);
    slopes.push(seg[intervals - 1]);
    let interpolant = PiecewiseLinear::new(xs, ys[0], slopes)?;
    let combo = pwl_to_relu(&interpolant)?.without_zero_terms();
    Ok(SmoothApprox { intervals, midpoint_slope_error, interpolant, combo })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Square,
    Sqrt,
    /// `max{1, a²}`; applied to `‖w‖²` it gives the quartic term.
    Max1Square,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Linear => a,
            Activation::Relu => relu(a),
            Activation::Square => a * a,
            Activation::Sqrt => a.sqrt(),
            Activation::Max1Square => (a * a).max(1.0),
        }
    }
}

/// A connection weight: a constant, or a slot of the trainable vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Fixed(f64),
    Slot(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    /// `(input index, weight)` pairs.
    pub inputs: Vec<(usize, Weight)>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredNet {
    pub input_dim: usize,
    pub slots: usize,
    pub layers: Vec<Vec<Unit>>,
}

impl LayeredNet {
    /// Output of the single unit in the last layer.
    pub fn forward(&self, w: &[f64], input: &[f64]) -> Result<f64> {
        check_len(self.slots, w.len())?;
        check_len(self.input_dim, input.len())?;
        let mut cur = input.to_vec();
        for layer in &self.layers {
            cur = layer
                .iter()
                .map(|u| {
                    let pre: f64 = u
                        .inputs
                        .iter()
                        .map(|&(i, wt)| {
                            cur[i]
                                * match wt {
                                    Weight::Fixed(c) => c,
                                    Weight::Slot(s) => w[s],
                                }
                        })
                        .sum();
                    u.activation.apply(pre)
                })
                .collect();
        }
        match cur.as_slice() {
            [out] => Ok(*out),
            _ => Err(Error::Configuration(format!("network has {} outputs, expected 1", cur.len()))),
        }
    }
}

fn anchor_vec(d: usize, alpha: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    if let Some(j) = anchor_coord(alpha) {
        v[j] = 1.0;
    }
    v
}

/// `x̃ = (x, −α ⊙ x)`.
pub fn fa_features(z: &SampleA) -> Vec<f64> {
    let d = z.x.len();
    let alpha = anchor_vec(d, z.alpha);
    let x: Vec<f64> = (0..d).map(|i| if z.x.get(i) { 1.0 } else { 0.0 }).collect();
    let mut out = x.clone();
    out.extend(x.iter().zip(&alpha).map(|(x, a)| -a * x));
    out
}

/// `x̃ = (x, −α ⊙ x, −α, 1)`.
pub fn fb_features(z: &SampleB) -> Vec<f64> {
    let d = z.x.len();
    let alpha = anchor_vec(d, z.alpha);
    let x: Vec<f64> = (0..d).map(|i| if z.x.get(i) { 1.0 } else { 0.0 }).collect();
    let mut out = x.clone();
    out.extend(x.iter().zip(&alpha).map(|(x, a)| -a * x));
    out.extend(alpha.iter().map(|a| -a));
    out.push(1.0);
    out
}

/// Square layer on `w_i x_i − α_i x_i`, then a square-root sum: the output
/// is `‖(w − α) ⊙ x‖`, and `f_A = y · output`.
pub fn build_fa_network(d: usize) -> LayeredNet {
    let first = (0..d)
        .map(|i| Unit {
            inputs: vec![(i, Weight::Slot(i)), (d + i, Weight::Fixed(1.0))],
            activation: Activation::Square,
        })
        .collect();
    let second = vec![Unit {
        inputs: (0..d).map(|i| (i, Weight::Fixed(1.0))).collect(),
        activation: Activation::Sqrt,
    }];
    LayeredNet { input_dim: 2 * d, slots: d, layers: vec![first, second] }
}

/// Squares of `(w − α) ⊙ x`, `w − α` and `w`, mixed with weights `1/2`,
/// `−c_n/2` and `1`; the last group passes through `max{1, a²}`. The output
/// is `f_B`.
pub fn build_fb_network(d: usize, c_n: f64) -> LayeredNet {
    let one = 3 * d;
    let mut first = Vec::with_capacity(3 * d);
    for i in 0..d {
        first.push(Unit {
            inputs: vec![(i, Weight::Slot(i)), (d + i, Weight::Fixed(1.0))],
            activation: Activation::Square,
        });
    }
    for i in 0..d {
        first.push(Unit {
            inputs: vec![(one, Weight::Slot(i)), (2 * d + i, Weight::Fixed(1.0))],
            activation: Activation::Square,
        });
    }
    for i in 0..d {
        first.push(Unit {
            inputs: vec![(one, Weight::Slot(i))],
            activation: Activation::Square,
        });
    }
    let group = |start: usize, c: f64, act: Activation| Unit {
        inputs: (start..start + d).map(|i| (i, Weight::Fixed(c))).collect(),
        activation: act,
    };
    let second = vec![
        group(0, 0.5, Activation::Linear),
        group(d, -0.5 * c_n, Activation::Linear),
        group(2 * d, 1.0, Activation::Max1Square),
    ];
    let third = vec![Unit {
        inputs: (0..3).map(|i| (i, Weight::Fixed(1.0))).collect(),
        activation: Activation::Linear,
    }];
    LayeredNet { input_dim: 3 * d + 1, slots: d, layers: vec![first, second, third] }
}
