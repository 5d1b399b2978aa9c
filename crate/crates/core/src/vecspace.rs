//! Dense vectors, packed bit masks and the handful of operations every
//! construction shares.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A real vector whose entries are kept finite at every public boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("entry {i} is not finite")));
        }
        Ok(Self(entries))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    /// Standard basis vector; `j` is zero-based.
    pub fn basis(d: usize, j: usize) -> Self {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        Self(v)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Packed {0,1} vector, 64 bits per word, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMask {
    len: usize,
    words: Vec<u64>,
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Self {
            len,
            words: vec![u64::MAX; len.div_ceil(64)],
        };
        m.clear_tail();
        m
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut m = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i, true);
            }
        }
        m
    }

    /// Builds a mask from raw words; bits past `len` are cleared.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Result<Self> {
        check_len(len.div_ceil(64), words.len())?;
        if let Some(last) = words.last_mut() {
            if len % 64 != 0 {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
        Ok(Self { len, words })
    }

    fn clear_tail(&mut self) {
        if self.len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let bit = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Zero-based indices of the set bits, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let t = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(wi * 64 + t)
                }
            })
        })
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: DenseVector,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: DenseVector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Parameter(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn origin(d: usize, radius: f64) -> Result<Self> {
        Self::new(DenseVector::zeros(d), radius)
    }
}

pub fn hadamard(w: &[f64], x: &BitMask) -> Result<DenseVector> {
    check_len(w.len(), x.len())?;
    Ok(w.iter()
        .enumerate()
        .map(|(i, &v)| if x.get(i) { v } else { 0.0 })
        .collect::<Vec<_>>()
        .into())
}

pub fn norm_sq(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}

pub fn norm(w: &[f64]) -> f64 {
    norm_sq(w).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn project_ball(w: &[f64], ball: &BallSpec) -> Result<DenseVector> {
    let mut out = w.to_vec();
    project_ball_in_place(&mut out, ball)?;
    Ok(out.into())
}

/// Projects in place; returns whether the point moved.
pub fn project_ball_in_place(w: &mut [f64], ball: &BallSpec) -> Result<bool> {
    check_len(ball.center.len(), w.len())?;
    if !(ball.radius >= 0.0) {
        return Err(Error::Parameter(format!(
            "ball radius must be nonnegative, got {}",
            ball.radius
        )));
    }
    let r = dist(w, &ball.center);
    if r <= ball.radius {
        return Ok(false);
    }
    let orig = w.to_vec();
    let mut scale = ball.radius / r;
    // Rounding can leave the rescaled point a hair outside the ball. Shrink
    // until it is inside so that projecting again is a no-op.
    loop {
        for ((wi, oi), ci) in w.iter_mut().zip(&orig).zip(ball.center.iter()) {
            *wi = ci + scale * (oi - ci);
        }
        if dist(w, &ball.center) <= ball.radius {
            break;
        }
        scale *= 1.0 - f64::EPSILON;
    }
    Ok(true)
}

/// Zero-based index of the first maximal entry.
pub fn argmax_coord(v: &[f64]) -> Result<usize> {
    if v.is_empty() {
        return Err(Error::Empty);
    }
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    Ok(best)
}
