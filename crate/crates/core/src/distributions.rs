//! Samplers for every data distribution used by the constructions, and
//! seeded dataset assembly.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, StreamKey};
use crate::vecspace::BitMask;

/// Largest n for which `d_for` will size a dataset.
pub const MAX_DESK_N: usize = 24;

/// Features `x ~ Bern(p)^d`, label `y ∈ {−1,+1}`, anchor `alpha`
/// (0 is the zero vector, j ≥ 1 is the basis vector e_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleA {
    pub x: BitMask,
    pub y: i8,
    pub alpha: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleB {
    pub x: BitMask,
    pub alpha: usize,
}

/// `beta` is the grid point with 1-based position `index` in `grid_h(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleKink {
    pub index: u64,
    pub beta: f64,
    pub y: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleDrift {
    pub z: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleC {
    pub blocks: Vec<SampleA>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleNN {
    pub x: BitMask,
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Sample {
    A(SampleA),
    B(SampleB),
    Kink(SampleKink),
    Drift(SampleDrift),
    C(SampleC),
    NN(SampleNN),
    Tuple(Vec<Sample>),
}

/// Zero-based coordinate of an anchor index, `None` for the zero vector.
#[inline]
pub fn anchor_coord(alpha: usize) -> Option<usize> {
    alpha.checked_sub(1)
}

/// The two distributions of the general lower bound for the quartic loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneralLb {
    /// Every coordinate uniform on {0,1}.
    D1,
    /// Coordinate `j_tilde` fixed to 0, all others uniform.
    D2,
}

/// A generating distribution together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistSpec {
    D { delta: f64, p: f64, a: usize, d: usize },
    Dbar { delta: f64, c_n: f64, v: usize, d: usize },
    GeneralLb { which: GeneralLb, j_tilde: usize, d: usize },
    Kink { n: usize },
    Drift,
    C { k: usize, d: usize, j_star: usize },
    NN { d: usize },
    Product(Vec<DistSpec>),
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} = {v} is not in [0,1]")))
            }
        };
        let anchor = |a: usize, d: usize| {
            if a <= d {
                Ok(())
            } else {
                Err(Error::Parameter(format!("anchor {a} exceeds dimension {d}")))
            }
        };
        match self {
            DistSpec::D { delta, p, a, d } => {
                if !(0.0..=0.5).contains(delta) {
                    return Err(Error::Parameter(format!("delta = {delta} is not in [0,1/2]")));
                }
                prob("p", *p)?;
                anchor(*a, *d)
            }
            DistSpec::Dbar { delta, c_n, v, d } => {
                prob("c_n + delta", c_n + delta)?;
                anchor(*v, *d)
            }
            DistSpec::GeneralLb { j_tilde, d, .. } => {
                if *j_tilde == 0 || j_tilde > d {
                    return Err(Error::Parameter(format!("j_tilde = {j_tilde} not in 1..={d}")));
                }
                Ok(())
            }
            DistSpec::Kink { n } => {
                if *n == 0 {
                    return Err(Error::Parameter("kink distribution needs n ≥ 1".into()));
                }
                Ok(())
            }
            DistSpec::Drift => Ok(()),
            DistSpec::C { k, d, j_star } => {
                if *k == 0 {
                    return Err(Error::Parameter("k must be at least 1".into()));
                }
                anchor(*j_star, *d)
            }
            DistSpec::NN { .. } => Ok(()),
            DistSpec::Product(parts) => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    /// Draws one sample. Parameters are assumed validated.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        match self {
            DistSpec::D { delta, p, a, d } => Sample::A(draw_a(*delta, *p, *a, *d, rng)),
            DistSpec::Dbar { delta, c_n, v, d } => Sample::B(SampleB {
                x: bernoulli_mask(*d, c_n + delta, rng),
                alpha: *v,
            }),
            DistSpec::GeneralLb { which, j_tilde, d } => {
                let mut x = bernoulli_mask(*d, 0.5, rng);
                if *which == GeneralLb::D2 {
                    x.set(j_tilde - 1, false);
                }
                Sample::B(SampleB { x, alpha: 0 })
            }
            DistSpec::Kink { n } => Sample::Kink(draw_kink(*n, rng)),
            DistSpec::Drift => Sample::Drift(sample_drift(rng)),
            DistSpec::C { k, d, j_star } => Sample::C(SampleC {
                blocks: (0..*k).map(|_| draw_a(0.1, 0.5, *j_star, *d, rng)).collect(),
            }),
            DistSpec::NN { d } => Sample::NN(sample_nn(*d, rng)),
            DistSpec::Product(parts) => Sample::Tuple(parts.iter().map(|p| p.sample(rng)).collect()),
        }
    }
}

/// Dimension at which a special coordinate exists with probability 0.9.
pub fn d_for(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    if n > MAX_DESK_N {
        let d = (std::f64::consts::LN_10 * (n as f64).exp2()).ceil() + 1.0;
        return Err(Error::Capacity {
            n,
            limit: MAX_DESK_N,
            required_bytes: (n as u128) * ((d as u128).div_ceil(8)),
        });
    }
    Ok((std::f64::consts::LN_10 * (1u64 << n) as f64).ceil() as usize + 1)
}

pub fn bernoulli_mask<R: Rng + ?Sized>(d: usize, p: f64, rng: &mut R) -> BitMask {
    if p <= 0.0 {
        return BitMask::zeros(d);
    }
    if p >= 1.0 {
        return BitMask::ones(d);
    }
    if p == 0.5 {
        let words = (0..d.div_ceil(64)).map(|_| rng.next_u64()).collect();
        return BitMask::from_words(d, words).expect("word count matches");
    }
    let mut m = BitMask::zeros(d);
    for i in 0..d {
        if rng.gen::<f64>() < p {
            m.set(i, true);
        }
    }
    m
}

fn draw_a<R: Rng + ?Sized>(delta: f64, p: f64, a: usize, d: usize, rng: &mut R) -> SampleA {
    let x = bernoulli_mask(d, p, rng);
    let y = if rng.gen::<f64>() < 0.5 + delta { 1 } else { -1 };
    SampleA { x, y, alpha: a }
}

pub fn sample_d<R: Rng + ?Sized>(delta: f64, p: f64, a: usize, d: usize, rng: &mut R) -> Result<SampleA> {
    DistSpec::D { delta, p, a, d }.validate()?;
    Ok(draw_a(delta, p, a, d, rng))
}

pub fn sample_dbar<R: Rng + ?Sized>(delta: f64, c_n: f64, v: usize, d: usize, rng: &mut R) -> Result<SampleB> {
    let spec = DistSpec::Dbar { delta, c_n, v, d };
    spec.validate()?;
    match spec.sample(rng) {
        Sample::B(s) => Ok(s),
        _ => unreachable!(),
    }
}

/// `n^{5/4}`, exact when n is a perfect fourth power.
pub fn n_pow_5_4(n: usize) -> f64 {
    let r = (n as f64).powf(0.25).round() as usize;
    if r.pow(4) == n {
        (n * r) as f64
    } else {
        (n as f64).powf(1.25)
    }
}

/// Number of points in the kink-location grid.
pub fn grid_h_len(n: usize) -> u64 {
    (4.0 * n_pow_5_4(n) + 1e-9).floor() as u64
}

/// The `i`-th grid point, `1 ≤ i ≤ grid_h_len(n)`.
#[inline]
pub fn grid_point(n: usize, i: u64) -> f64 {
    0.25 + i as f64 / (8.0 * n_pow_5_4(n))
}

/// Kink locations `1/4 + i/(8 n^{5/4})`, ascending.
pub fn grid_h(n: usize) -> Vec<f64> {
    (1..=grid_h_len(n)).map(|i| grid_point(n, i)).collect()
}

fn draw_kink<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SampleKink {
    let index = rng.gen_range(1..=grid_h_len(n));
    let y = if rng.gen::<bool>() { 1 } else { -1 };
    SampleKink {
        index,
        beta: grid_point(n, index),
        y,
    }
}

pub fn sample_kink<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SampleKink> {
    DistSpec::Kink { n }.validate()?;
    Ok(draw_kink(n, rng))
}

pub fn sample_drift<R: Rng + ?Sized>(rng: &mut R) -> SampleDrift {
    SampleDrift {
        z: if rng.gen::<bool>() { 1 } else { -1 },
    }
}

pub fn sample_c<R: Rng + ?Sized>(k: usize, d: usize, j_star: usize, rng: &mut R) -> Result<SampleC> {
    let spec = DistSpec::C { k, d, j_star };
    spec.validate()?;
    match spec.sample(rng) {
        Sample::C(s) => Ok(s),
        _ => unreachable!(),
    }
}

pub fn sample_nn<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SampleNN {
    let x = bernoulli_mask(d, 0.5, rng);
    let y = u8::from(rng.gen::<f64>() < 0.25);
    SampleNN { x, y }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub spec: DistSpec,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sample `i` comes from its own stream keyed by `(seed, i)`, so a dataset of
/// size n is a prefix of every larger dataset with the same seed.
pub fn make_dataset(spec: &DistSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let key = StreamKey::new(seed, Domain::Dataset);
    let samples = (0..n as u64).map(|i| spec.sample(&mut key.stream(i))).collect();
    Ok(Dataset {
        spec: spec.clone(),
        seed,
        samples,
    })
}

const MAGIC: &[u8; 8] = b"SCOSEP01";

fn put_mask<W: Write>(out: &mut W, m: &BitMask) -> std::io::Result<()> {
    out.write_all(&(m.len() as u64).to_le_bytes())?;
    for w in m.words() {
        out.write_all(&w.to_le_bytes())?;
    }
    Ok(())
}

fn put_sample<W: Write>(out: &mut W, s: &Sample) -> std::io::Result<()> {
    match s {
        Sample::A(a) => {
            out.write_all(&[1])?;
            put_a(out, a)
        }
        Sample::B(b) => {
            out.write_all(&[2])?;
            put_mask(out, &b.x)?;
            out.write_all(&(b.alpha as u64).to_le_bytes())
        }
        Sample::Kink(k) => {
            out.write_all(&[3])?;
            out.write_all(&k.index.to_le_bytes())?;
            out.write_all(&k.beta.to_bits().to_le_bytes())?;
            out.write_all(&[k.y as u8])
        }
        Sample::Drift(z) => out.write_all(&[4, z.z as u8]),
        Sample::C(c) => {
            out.write_all(&[5])?;
            out.write_all(&(c.blocks.len() as u64).to_le_bytes())?;
            c.blocks.iter().try_for_each(|a| put_a(out, a))
        }
        Sample::NN(s) => {
            out.write_all(&[6])?;
            put_mask(out, &s.x)?;
            out.write_all(&[s.y])
        }
        Sample::Tuple(parts) => {
            out.write_all(&[7])?;
            out.write_all(&(parts.len() as u64).to_le_bytes())?;
            parts.iter().try_for_each(|p| put_sample(out, p))
        }
    }
}

fn put_a<W: Write>(out: &mut W, a: &SampleA) -> std::io::Result<()> {
    put_mask(out, &a.x)?;
    out.write_all(&[a.y as u8])?;
    out.write_all(&(a.alpha as u64).to_le_bytes())
}

/// Writes the versioned binary fixture format.
pub fn write_dataset<W: Write>(ds: &Dataset, out: &mut W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&ds.seed.to_le_bytes())?;
    let spec = serde_json::to_vec(&ds.spec).map_err(std::io::Error::other)?;
    out.write_all(&(spec.len() as u64).to_le_bytes())?;
    out.write_all(&spec)?;
    out.write_all(&(ds.samples.len() as u64).to_le_bytes())?;
    ds.samples.iter().try_for_each(|s| put_sample(out, s))
}

struct Reader<'a, R: Read>(&'a mut R);

impl<R: Read> Reader<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("truncated input: {e}")))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }
    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v <= 1 << 40)
            .ok_or_else(|| Error::Format(format!("length {v} out of range")))
    }
    fn mask(&mut self) -> Result<BitMask> {
        let len = self.len()?;
        let words = (0..len.div_ceil(64)).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        BitMask::from_words(len, words)
    }
    fn a(&mut self) -> Result<SampleA> {
        let x = self.mask()?;
        let y = self.u8()? as i8;
        let alpha = self.len()?;
        Ok(SampleA { x, y, alpha })
    }
    fn sample(&mut self) -> Result<Sample> {
        Ok(match self.u8()? {
            1 => Sample::A(self.a()?),
            2 => {
                let x = self.mask()?;
                Sample::B(SampleB { x, alpha: self.len()? })
            }
            3 => {
                let index = self.u64()?;
                let beta = f64::from_bits(self.u64()?);
                Sample::Kink(SampleKink {
                    index,
                    beta,
                    y: self.u8()? as i8,
                })
            }
            4 => Sample::Drift(SampleDrift { z: self.u8()? as i8 }),
            5 => {
                let k = self.len()?;
                Sample::C(SampleC {
                    blocks: (0..k).map(|_| self.a()).collect::<Result<_>>()?,
                })
            }
            6 => {
                let x = self.mask()?;
                Sample::NN(SampleNN { x, y: self.u8()? })
            }
            7 => {
                let k = self.len()?;
                Sample::Tuple((0..k).map(|_| self.sample()).collect::<Result<_>>()?)
            }
            t => return Err(Error::Format(format!("unknown sample tag {t}"))),
        })
    }
}

pub fn read_dataset<R: Read>(input: &mut R) -> Result<Dataset> {
    let mut r = Reader(input);
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let seed = r.u64()?;
    let spec_len = r.len()?;
    let mut spec = vec![0u8; spec_len];
    r.0.read_exact(&mut spec)
        .map_err(|e| Error::Format(format!("truncated spec: {e}")))?;
    let spec: DistSpec =
        serde_json::from_slice(&spec).map_err(|e| Error::Format(format!("bad spec: {e}")))?;
    let n = r.len()?;
    let samples = (0..n).map(|_| r.sample()).collect::<Result<_>>()?;
    Ok(Dataset { spec, seed, samples })
}
