//! Regularized empirical risk over a finite candidate set with local
//! refinement, the spurious-coordinate finder, and separation certificates.
//!
//! Exact RERM over all of R^d is out of reach for these nonconvex empirical
//! losses, so every result here is a restricted argmin and says so.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{Dataset, DistSpec, Sample};
use crate::error::{check_len, Error, Result};
use crate::losses::LossSpec;
use crate::optimizers::build_objective;
use crate::population::{pop_fa, PopEstimate, PopOptions};
use crate::vecspace::{norm_sq, BitMask, DenseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regularizer {
    None,
    /// `λ ‖w‖²`
    L2Squared { lambda: f64 },
    /// `λ · table[label]`, defined on labelled candidates only.
    Table { lambda: f64, table: BTreeMap<String, f64> },
}

impl Regularizer {
    pub fn l2(lambda: f64) -> Result<Self> {
        let r = Regularizer::L2Squared { lambda };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = match self {
            Regularizer::None => return Ok(()),
            Regularizer::L2Squared { lambda } | Regularizer::Table { lambda, .. } => *lambda,
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be finite and ≥ 0, got {lambda}")));
        }
        Ok(())
    }

    /// `R(w)` at a candidate with the given label.
    pub fn value(&self, label: &str, w: &[f64]) -> Result<f64> {
        match self {
            Regularizer::None => Ok(0.0),
            Regularizer::L2Squared { lambda } => Ok(lambda * norm_sq(w)),
            Regularizer::Table { lambda, table } => table
                .get(label)
                .map(|v| lambda * v)
                .ok_or_else(|| Error::Configuration(format!("regularizer table has no entry for `{label}`"))),
        }
    }

    fn add_grad(&self, w: &[f64], grad: &mut [f64]) {
        if let Regularizer::L2Squared { lambda } = self {
            for (g, v) in grad.iter_mut().zip(w) {
                *g += 2.0 * lambda * v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub point: DenseVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub points: Vec<Candidate>,
}

/// Scales tried along the spurious direction.
pub const DEFAULT_SCALES: [f64; 8] = [0.5, 2.0, 5.0, 10.0, 30.0, 100.0, 300.0, 1000.0];

impl CandidateSet {
    pub fn new(points: Vec<Candidate>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty);
        }
        let d = points[0].point.len();
        for c in &points {
            check_len(d, c.point.len())?;
        }
        Ok(Self { points })
    }

    /// `0`, `e_{j*}`, `(1 ± 100ε) e_{j*}`, and when a spurious coordinate is
    /// known, `e_ĵ` and `c · e_ĵ` for each scale. Indices are 1-based.
    pub fn structured(d: usize, j_star: usize, j_hat: Option<usize>, eps: f64, scales: &[f64]) -> Result<Self> {
        let basis = |j: usize, c: f64| {
            let mut v = vec![0.0; d];
            v[j - 1] = c;
            DenseVector::from(v)
        };
        let mut pts = vec![Candidate {
            label: "zero".into(),
            point: DenseVector::zeros(d),
        }];
        if j_star > 0 {
            pts.push(Candidate {
                label: "e_jstar".into(),
                point: basis(j_star, 1.0),
            });
            for (tag, c) in [("minus", 1.0 - 100.0 * eps), ("plus", 1.0 + 100.0 * eps)] {
                pts.push(Candidate {
                    label: format!("e_jstar_{tag}"),
                    point: basis(j_star, c),
                });
            }
        }
        if let Some(j) = j_hat {
            pts.push(Candidate {
                label: "e_jhat".into(),
                point: basis(j, 1.0),
            });
            for &c in scales {
                pts.push(Candidate {
                    label: format!("e_jhat_x{c}"),
                    point: basis(j, c),
                });
            }
        }
        Self::new(pts)
    }
}

/// `F_S(w)`, summed in dataset order.
pub fn empirical_risk(w: &[f64], samples: &[Sample], loss: &LossSpec) -> Result<f64> {
    check_len(loss.dim(), w.len())?;
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for z in samples {
        loss.check_sample(z)?;
        total += loss.value(w, z);
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpecialMode {
    /// `x[ĵ] = 0` whenever `y = +1` and `x[ĵ] = 1` whenever `y = −1`.
    Signed,
    /// `x[ĵ] = 0` in every sample.
    AllZero,
    /// `x[ĵ] = y` in every sample.
    LabelMatch,
}

impl std::str::FromStr for SpecialMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "signed" => Ok(SpecialMode::Signed),
            "all_zero" => Ok(SpecialMode::AllZero),
            "label_match" => Ok(SpecialMode::LabelMatch),
            _ => Err(Error::Parameter(format!("unknown special-coordinate mode `{s}`"))),
        }
    }
}

/// The anchor coordinate planted by the generating distribution, 1-based.
pub fn planted_coordinate(spec: &DistSpec) -> Option<usize> {
    match spec {
        DistSpec::D { a, .. } => Some(*a),
        DistSpec::Dbar { v, .. } => Some(*v),
        DistSpec::C { j_star, .. } => Some(*j_star),
        _ => None,
    }
    .filter(|&j| j > 0)
}

/// Smallest qualifying 1-based coordinate other than the planted one.
pub fn find_special_coordinate(dataset: &Dataset, mode: SpecialMode) -> Result<Option<usize>> {
    let first = dataset.samples.first().ok_or(Error::Empty)?;
    let d = match (first, mode) {
        (Sample::A(s), SpecialMode::Signed | SpecialMode::AllZero) => s.x.len(),
        (Sample::B(s), SpecialMode::AllZero) => s.x.len(),
        (Sample::NN(s), SpecialMode::LabelMatch) => s.x.len(),
        _ => {
            return Err(Error::Configuration(format!(
                "mode {mode:?} does not apply to this dataset kind"
            )))
        }
    };
    let mut words = BitMask::ones(d).words().to_vec();
    let mut keep = |x: &BitMask, want_one: bool| -> Result<()> {
        check_len(d, x.len())?;
        for (acc, &w) in words.iter_mut().zip(x.words()) {
            *acc &= if want_one { w } else { !w };
        }
        Ok(())
    };
    for z in &dataset.samples {
        match (z, mode) {
            (Sample::A(s), SpecialMode::Signed) => keep(&s.x, s.y < 0)?,
            (Sample::A(s), SpecialMode::AllZero) => keep(&s.x, false)?,
            (Sample::B(s), SpecialMode::AllZero) => keep(&s.x, false)?,
            (Sample::NN(s), SpecialMode::LabelMatch) => keep(&s.x, s.y == 1)?,
            _ => return Err(Error::Configuration("dataset mixes sample kinds".into())),
        }
    }
    let mask = BitMask::from_words(d, words)?;
    let planted = planted_coordinate(&dataset.spec);
    let found = mask.iter_ones().map(|j| j + 1).find(|&j| Some(j) != planted);
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RermResult {
    /// Label of the winning candidate, or `refined` if refinement improved it.
    pub label: String,
    pub point: DenseVector,
    pub empirical_risk: f64,
    pub regularized_risk: f64,
    pub restricted_argmin: bool,
}

/// Evaluates `F_S + R` on every candidate, then runs `refine_steps` of
/// subgradient descent with step `1/√refine_steps` from the best one and
/// returns the best point seen. Earlier candidates win ties.
pub fn rerm_search(
    samples: &[Sample],
    loss: &LossSpec,
    reg: &Regularizer,
    candidates: &CandidateSet,
    refine_steps: usize,
) -> Result<RermResult> {
    reg.validate()?;
    let obj = build_objective(loss, samples)?;
    let mut best: Option<RermResult> = None;
    for c in &candidates.points {
        check_len(loss.dim(), c.point.len())?;
        let emp = obj.value(&c.point);
        let total = emp + reg.value(&c.label, &c.point)?;
        if best.as_ref().map_or(true, |b| total < b.regularized_risk) {
            best = Some(RermResult {
                label: c.label.clone(),
                point: c.point.clone(),
                empirical_risk: emp,
                regularized_risk: total,
                restricted_argmin: true,
            });
        }
    }
    let mut best = best.expect("candidate sets are non-empty");
    if refine_steps == 0 {
        return Ok(best);
    }
    if matches!(reg, Regularizer::Table { .. }) {
        return Err(Error::Configuration("table regularizers are undefined off the candidate set".into()));
    }
    let step = 1.0 / (refine_steps as f64).sqrt();
    let mut w = best.point.to_vec();
    let mut grad = vec![0.0; w.len()];
    for i in 0..=refine_steps {
        let emp = obj.value_grad(&w, &mut grad);
        let total = emp + reg.value("", &w)?;
        if !total.is_finite() {
            break;
        }
        if i > 0 && total < best.regularized_risk {
            best = RermResult {
                label: "refined".into(),
                point: w.clone().into(),
                empirical_risk: emp,
                regularized_risk: total,
                restricted_argmin: true,
            };
        }
        if i == refine_steps {
            break;
        }
        reg.add_grad(&w, &mut grad);
        for (v, g) in w.iter_mut().zip(&grad) {
            *v -= step * g;
        }
    }
    Ok(best)
}

/// `{10⁻³, 10⁻², …, 10³}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Separated,
    NotSeparated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub winner: String,
    pub regularized_risk: f64,
    pub population_excess: PopEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub restricted_argmin: bool,
    pub n: usize,
    pub d: usize,
    pub j_star: usize,
    pub j_hat: Option<usize>,
    pub empirical_e_jhat: Option<f64>,
    pub empirical_e_jstar: f64,
    pub excess_e_jhat: Option<PopEstimate>,
    pub excess_e_jstar: PopEstimate,
    pub threshold: f64,
    pub sweep: Vec<SweepEntry>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateOptions {
    pub lambdas: Vec<f64>,
    pub threshold: f64,
    pub refine_steps: usize,
    pub eps: f64,
    pub pop: PopOptions,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            lambdas: default_lambda_grid(),
            threshold: 0.1,
            refine_steps: 100,
            eps: 1e-4,
            pop: PopOptions::default(),
        }
    }
}

/// Runs the λ-wise candidate RERM on an `f_A` dataset and reports each
/// winner's population excess. SEPARATED means every winner's excess is at
/// least the threshold.
pub fn separation_certificate(dataset: &Dataset, opts: &CertificateOptions) -> Result<SeparationCertificate> {
    let (delta, p, a, d) = match dataset.spec {
        DistSpec::D { delta, p, a, d } => (delta, p, a, d),
        _ => return Err(Error::Configuration("separation certificates need an f_A dataset".into())),
    };
    let loss = LossSpec::Fa { d };
    let j_hat = find_special_coordinate(dataset, SpecialMode::Signed)?;
    let basis = |j: usize| DenseVector::basis(d, j - 1);
    let excess = |w: &[f64]| -> Result<PopEstimate> { Ok(pop_fa(w, delta, p, a, &opts.pop)?.estimate) };
    let e_star = if a > 0 { basis(a) } else { DenseVector::zeros(d) };
    let mut cert = SeparationCertificate {
        restricted_argmin: true,
        n: dataset.len(),
        d,
        j_star: a,
        j_hat,
        empirical_e_jhat: None,
        empirical_e_jstar: empirical_risk(&e_star, &dataset.samples, &loss)?,
        excess_e_jhat: None,
        excess_e_jstar: excess(&e_star)?,
        threshold: opts.threshold,
        sweep: Vec::new(),
        verdict: Verdict::Inconclusive,
    };
    let Some(j) = j_hat else {
        return Ok(cert);
    };
    cert.empirical_e_jhat = Some(empirical_risk(&basis(j), &dataset.samples, &loss)?);
    cert.excess_e_jhat = Some(excess(&basis(j))?);
    let cands = CandidateSet::structured(d, a, Some(j), opts.eps, &DEFAULT_SCALES)?;
    let mut separated = true;
    for &lambda in &opts.lambdas {
        let r = rerm_search(&dataset.samples, &loss, &Regularizer::l2(lambda)?, &cands, opts.refine_steps)?;
        let e = excess(&r.point)?;
        separated &= e.mean >= opts.threshold;
        cert.sweep.push(SweepEntry {
            lambda,
            winner: r.label,
            regularized_risk: r.regularized_risk,
            population_excess: e,
        });
    }
    cert.verdict = if separated { Verdict::Separated } else { Verdict::NotSeparated };
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_dataset, SampleA};

    fn sample_a(y: i8, bits: &[bool], alpha: usize) -> Sample {
        Sample::A(SampleA {
            x: BitMask::from_bits(bits),
            y,
            alpha,
        })
    }

    fn fixed(spec: DistSpec, samples: Vec<Sample>) -> Dataset {
        Dataset { spec, seed: 0, samples }
    }

    #[test]
    fn signed_coordinate_example() {
        let spec = DistSpec::D { delta: 0.1, p: 0.5, a: 0, d: 3 };
        let ds = fixed(
            spec,
            vec![
                sample_a(1, &[false, true, false], 0),
                sample_a(-1, &[true, true, false], 0),
            ],
        );
        assert_eq!(find_special_coordinate(&ds, SpecialMode::Signed).unwrap(), Some(1));
        let ones = fixed(
            DistSpec::D { delta: 0.1, p: 0.5, a: 0, d: 2 },
            vec![sample_a(1, &[true, true], 0), sample_a(-1, &[true, true], 0)],
        );
        assert_eq!(find_special_coordinate(&ones, SpecialMode::AllZero).unwrap(), None);
        assert!(find_special_coordinate(&ones, SpecialMode::LabelMatch).is_err());
    }

    #[test]
    fn planted_coordinate_is_excluded() {
        let spec = DistSpec::D { delta: 0.1, p: 0.5, a: 1, d: 3 };
        let ds = fixed(spec, vec![sample_a(1, &[false, false, true], 1)]);
        assert_eq!(find_special_coordinate(&ds, SpecialMode::Signed).unwrap(), Some(2));
    }

    #[test]
    fn empirical_risk_examples() {
        let d = 40;
        let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 3, d }, 30, 1).unwrap();
        let loss = LossSpec::Fa { d };
        assert_eq!(empirical_risk(&DenseVector::basis(d, 2), &ds.samples, &loss).unwrap(), 0.0);
        let one = &ds.samples[..1];
        let w: Vec<f64> = (0..d).map(|i| i as f64 / 10.0).collect();
        assert_eq!(empirical_risk(&w, one, &loss).unwrap(), loss.value(&w, &one[0]));

        // With a zero anchor, e_ĵ scores 0 on positives and −1 on negatives.
        let n = 10;
        let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 0, d: 9433 }, n, 4).unwrap();
        let j = find_special_coordinate(&ds, SpecialMode::Signed).unwrap().expect("coordinate exists");
        let neg = ds.samples.iter().filter(|z| matches!(z, Sample::A(s) if s.y < 0)).count();
        let r = empirical_risk(&DenseVector::basis(9433, j - 1), &ds.samples, &LossSpec::Fa { d: 9433 }).unwrap();
        assert_eq!(r, -(neg as f64) / n as f64);
    }

    #[test]
    fn search_contracts() {
        let d = 9433;
        let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 0, d }, 12, 6).unwrap();
        let j = find_special_coordinate(&ds, SpecialMode::Signed).unwrap().unwrap();
        let loss = LossSpec::Fa { d };
        let two = CandidateSet::new(vec![
            Candidate { label: "zero".into(), point: DenseVector::zeros(d) },
            Candidate { label: "e_jhat".into(), point: DenseVector::basis(d, j - 1) },
        ])
        .unwrap();
        let r = rerm_search(&ds.samples, &loss, &Regularizer::None, &two, 0).unwrap();
        assert_eq!(r.label, "e_jhat");
        let huge = Regularizer::l2(1e6).unwrap();
        assert_eq!(rerm_search(&ds.samples, &loss, &huge, &two, 0).unwrap().label, "zero");

        let cands = CandidateSet::structured(d, 1, Some(j), 1e-4, &DEFAULT_SCALES).unwrap();
        for lambda in default_lambda_grid() {
            let reg = Regularizer::l2(lambda).unwrap();
            let r = rerm_search(&ds.samples, &loss, &reg, &cands, 20).unwrap();
            for c in &cands.points {
                let v = empirical_risk(&c.point, &ds.samples, &loss).unwrap() + reg.value(&c.label, &c.point).unwrap();
                assert!(r.regularized_risk <= v);
            }
        }
        assert!(Regularizer::l2(-1.0).is_err());
    }

    #[test]
    fn table_regularizer_is_candidate_only() {
        let d = 5;
        let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 1, d }, 8, 2).unwrap();
        let cands = CandidateSet::structured(d, 1, Some(2), 1e-4, &[]).unwrap();
        let table: BTreeMap<String, f64> = cands.points.iter().map(|c| (c.label.clone(), 0.0)).collect();
        let reg = Regularizer::Table { lambda: 1.0, table };
        let loss = LossSpec::Fa { d };
        assert!(rerm_search(&ds.samples, &loss, &reg, &cands, 0).is_ok());
        assert!(rerm_search(&ds.samples, &loss, &reg, &cands, 5).is_err());
    }

    #[test]
    fn certificate_fields() {
        let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 1, d: 9433 }, 12, 3).unwrap();
        let opts = CertificateOptions {
            refine_steps: 10,
            pop: PopOptions { mc_samples: 2000, ..PopOptions::default() },
            ..CertificateOptions::default()
        };
        let c = separation_certificate(&ds, &opts).unwrap();
        assert_eq!(c.empirical_e_jstar, 0.0);
        assert_eq!(c.excess_e_jstar.mean, 0.0);
        if let Some(e) = c.excess_e_jhat {
            assert!(e.mean >= 2.0 * 0.1 * 0.5 * std::f64::consts::SQRT_2 * 0.99);
            assert_eq!(c.sweep.len(), 7);
        } else {
            assert_eq!(c.verdict, Verdict::Inconclusive);
        }
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.starts_with("{\"restricted_argmin\":true,\"n\":12,"));
    }

    #[test]
    fn negatives_are_common() {
        // |S⁻| ≥ n/5 at n = 32, labels only.
        let n = 32;
        let hits = (0..500)
            .filter(|&seed| {
                let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 1, d: 1 }, n, seed).unwrap();
                let neg = ds.samples.iter().filter(|z| matches!(z, Sample::A(s) if s.y < 0)).count();
                5 * neg >= n
            })
            .count();
        assert!(hits as f64 / 500.0 >= 0.85, "{hits}");
    }

    #[test]
    #[ignore = "slow: exact 7n/20 bound at n = 300"]
    fn negatives_at_full_scale() {
        let n = 300;
        let hits = (0..500)
            .filter(|&seed| {
                let ds = make_dataset(&DistSpec::D { delta: 0.1, p: 0.5, a: 1, d: 1 }, n, seed).unwrap();
                let neg = ds.samples.iter().filter(|z| matches!(z, Sample::A(s) if s.y < 0)).count();
                20 * neg >= 7 * n
            })
            .count();
        assert!(hits as f64 / 500.0 >= 0.85, "{hits}");
    }
}
