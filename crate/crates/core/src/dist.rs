//! Probability vectors, classical ensembles and joint tables.
//!
//! Two numeric backends live side by side: [`Distribution`] stores IEEE
//! doubles and feeds the entropy and optimisation code, while
//! [`ExactDistribution`] stores big rationals for constructions whose
//! values must come out exact (trace distances of small examples, the
//! fixed-point conditions of the zero-error rigidity check).
//!
//! Symbols are 0-based everywhere in code. Documentation that speaks of
//! `c ∈ {1,…,d}` refers to index `c - 1`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on `Σ p_c = 1` for the floating backend.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidDimension("alphabet size must be at least 1".into()));
    }
    Ok(())
}

/// A probability vector over `{0, …, d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_dim(probs.len())?;
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::NotNormalized(format!("entry {i} is {p}")));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes a non-negative weight vector.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        check_dim(weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NotNormalized("weights must be finite and non-negative".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::NotNormalized("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// Constructor for internally produced vectors that are normalized up to
    /// accumulated rounding; renormalizes instead of rejecting.
    pub(crate) fn from_vec_unchecked(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total = compensated_sum(probs.iter().copied());
        if total > 0.0 && (total - 1.0).abs() > f64::EPSILON {
            for p in probs.iter_mut() {
                *p /= total;
            }
        }
        Self { probs }
    }

    pub fn uniform(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            probs: vec![1.0 / d as f64; d],
        })
    }

    /// `v_c = (d - c + 1) / η` for `c = 1..=d`, `η = d(d+1)/2`.
    pub fn staircase(d: usize) -> Result<Self> {
        check_dim(d)?;
        let eta = staircase_eta(d) as f64;
        Ok(Self {
            probs: (0..d).map(|k| (d - k) as f64 / eta).collect(),
        })
    }

    pub fn point_mass(d: usize, index: usize) -> Result<Self> {
        check_dim(d)?;
        if index >= d {
            return Err(Error::InvalidInput(format!(
                "index {index} outside alphabet of size {d}"
            )));
        }
        let mut probs = vec![0.0; d];
        probs[index] = 1.0;
        Ok(Self { probs })
    }

    pub fn d(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i)
    }

    /// Product distribution; entry `a * q.d() + b` holds `p_a q_b`.
    pub fn product(&self, other: &Distribution) -> Distribution {
        let probs = self
            .probs
            .iter()
            .flat_map(|a| other.probs.iter().map(move |b| a * b))
            .collect();
        Distribution::from_vec_unchecked(probs)
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        let index = WeightedIndex::new(&self.probs).expect("distribution has positive mass");
        (0..n).map(|_| index.sample(rng)).collect()
    }
}

/// `η = d(d+1)/2`.
pub fn staircase_eta(d: usize) -> u64 {
    let d = d as u64;
    d * (d + 1) / 2
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.probs.iter().map(|p| format!("{p:?}")).collect();
        strings.serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrString {
    Number(f64),
    Text(String),
}

impl NumberOrString {
    fn to_f64(&self) -> Result<f64> {
        match self {
            NumberOrString::Number(x) => Ok(*x),
            NumberOrString::Text(s) => parse_probability(s),
        }
    }
}

/// Parses `"0.25"`, `"1/4"` or `"1"` into a double.
pub fn parse_probability(s: &str) -> Result<f64> {
    let s = s.trim();
    if s.contains('/') {
        let q = parse_rational(s)?;
        rational_to_f64(&q).ok_or_else(|| Error::Parse(format!("cannot represent {s}")))
    } else {
        s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<NumberOrString> = Vec::deserialize(d)?;
        let probs = raw
            .iter()
            .map(NumberOrString::to_f64)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Distribution::new(probs).map_err(D::Error::custom)
    }
}

/// Parses `"num/den"`, an integer, or a plain decimal such as `"0.125"`
/// into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if whole_digits.is_empty() { "0" } else { whole_digits }, frac);
        let mut numer = BigInt::from_str(&digits).map_err(|_| bad())?;
        if negative {
            numer = -numer;
        }
        let denom = num_traits::pow(BigInt::from(10u32), frac.len());
        return Ok(BigRational::new(numer, denom));
    }
    let n = BigInt::from_str(s).map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

pub fn rational_to_f64(q: &BigRational) -> Option<f64> {
    num_traits::ToPrimitive::to_f64(q)
}

/// A probability vector with exact rational entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactDistribution {
    probs: Vec<BigRational>,
}

impl ExactDistribution {
    pub fn new(probs: Vec<BigRational>) -> Result<Self> {
        check_dim(probs.len())?;
        if let Some(i) = probs.iter().position(|p| p.is_negative()) {
            return Err(Error::NotNormalized(format!("entry {i} is negative")));
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::NotNormalized(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Convenience constructor from `(numerator, denominator)` pairs.
    pub fn from_ratios(ratios: &[(i64, i64)]) -> Result<Self> {
        if ratios.iter().any(|(_, den)| *den == 0) {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        Self::new(
            ratios
                .iter()
                .map(|(n, d)| BigRational::new(BigInt::from(*n), BigInt::from(*d)))
                .collect(),
        )
    }

    pub fn uniform(d: usize) -> Result<Self> {
        check_dim(d)?;
        let p = BigRational::new(BigInt::one(), BigInt::from(d));
        Ok(Self { probs: vec![p; d] })
    }

    pub fn staircase(d: usize) -> Result<Self> {
        check_dim(d)?;
        let eta = BigInt::from(staircase_eta(d));
        Ok(Self {
            probs: (0..d)
                .map(|k| BigRational::new(BigInt::from(d - k), eta.clone()))
                .collect(),
        })
    }

    pub fn d(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    pub fn product(&self, other: &ExactDistribution) -> ExactDistribution {
        let probs = self
            .probs
            .iter()
            .flat_map(|a| other.probs.iter().map(move |b| a * b))
            .collect();
        ExactDistribution { probs }
    }

    pub fn to_f64(&self) -> Distribution {
        Distribution::from_vec_unchecked(self.probs.iter().map(|p| rational_to_f64(p).unwrap_or(0.0)).collect())
    }
}

impl fmt::Display for ExactDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// `"num/den"` string for a rational; integers print with denominator 1.
pub fn rational_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

impl Serialize for ExactDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.probs.iter().map(rational_string).collect();
        strings.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        let probs = raw
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        ExactDistribution::new(probs).map_err(D::Error::custom)
    }
}

/// Prior over labels plus one conditional distribution per label, all on
/// a shared alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr", into = "EnsembleRepr")]
pub struct ClassicalEnsemble {
    priors: Distribution,
    conditionals: Vec<Distribution>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    priors: Distribution,
    conditionals: Vec<Distribution>,
}

impl TryFrom<EnsembleRepr> for ClassicalEnsemble {
    type Error = Error;
    fn try_from(r: EnsembleRepr) -> Result<Self> {
        ClassicalEnsemble::new(r.priors, r.conditionals)
    }
}

impl From<ClassicalEnsemble> for EnsembleRepr {
    fn from(e: ClassicalEnsemble) -> Self {
        EnsembleRepr {
            priors: e.priors,
            conditionals: e.conditionals,
        }
    }
}

impl ClassicalEnsemble {
    pub fn new(priors: Distribution, conditionals: Vec<Distribution>) -> Result<Self> {
        if priors.d() != conditionals.len() {
            return Err(Error::DimensionMismatch {
                expected: priors.d(),
                found: conditionals.len(),
            });
        }
        let d = conditionals[0].d();
        if let Some(bad) = conditionals.iter().find(|c| c.d() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.d(),
            });
        }
        Ok(Self { priors, conditionals })
    }

    pub fn equiprobable(conditionals: Vec<Distribution>) -> Result<Self> {
        let priors = Distribution::uniform(conditionals.len())?;
        Self::new(priors, conditionals)
    }

    /// Equiprobable pair of `uniform(d)` (label 0) and `staircase(d)` (label 1).
    pub fn uniform_staircase(d: usize) -> Result<Self> {
        Self::equiprobable(vec![Distribution::uniform(d)?, Distribution::staircase(d)?])
    }

    pub fn priors(&self) -> &Distribution {
        &self.priors
    }

    pub fn conditionals(&self) -> &[Distribution] {
        &self.conditionals
    }

    pub fn labels(&self) -> usize {
        self.conditionals.len()
    }

    /// Alphabet size of `C`.
    pub fn d(&self) -> usize {
        self.conditionals[0].d()
    }

    /// `p_C = Σ_x p_x ρ^x`.
    pub fn average(&self) -> Distribution {
        let d = self.d();
        let probs = (0..d)
            .map(|c| {
                compensated_sum(
                    self.priors
                        .probs()
                        .iter()
                        .zip(&self.conditionals)
                        .map(|(px, rho)| px * rho.get(c)),
                )
            })
            .collect();
        Distribution::from_vec_unchecked(probs)
    }

    /// Whether the ensemble has exactly two equiprobable labels.
    pub fn is_equiprobable_pair(&self) -> bool {
        self.labels() == 2 && self.priors.probs().iter().all(|p| (p - 0.5).abs() < 1e-15)
    }
}

/// Joint table `p(x, c, c′)` with axis sizes `(nx, nc, ncp)`.
///
/// Ensemble-derived tables have `nc == ncp == d`; the information-measure
/// property suites also use rectangular shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    nx: usize,
    nc: usize,
    ncp: usize,
    table: Vec<f64>,
}

impl JointDistribution {
    pub fn new(nx: usize, nc: usize, ncp: usize, table: Vec<f64>) -> Result<Self> {
        if nx == 0 || nc == 0 || ncp == 0 {
            return Err(Error::InvalidDimension("joint axis of size zero".into()));
        }
        if table.len() != nx * nc * ncp {
            return Err(Error::DimensionMismatch {
                expected: nx * nc * ncp,
                found: table.len(),
            });
        }
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NotNormalized("negative or non-finite joint entry".into()));
        }
        let total = compensated_sum(table.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(format!("joint sums to {total}")));
        }
        Ok(Self { nx, nc, ncp, table })
    }

    pub(crate) fn from_vec_unchecked(nx: usize, nc: usize, ncp: usize, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), nx * nc * ncp);
        Self { nx, nc, ncp, table }
    }

    /// Two-axis joint `p(a, b)` embedded with a trivial label axis.
    pub fn pair(na: usize, nb: usize, table: Vec<f64>) -> Result<Self> {
        Self::new(1, na, nb, table)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nx, self.nc, self.ncp)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn at(&self, x: usize, c: usize, cp: usize) -> f64 {
        self.table[(x * self.nc + c) * self.ncp + cp]
    }

    pub fn label_marginal(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|x| {
                compensated_sum(
                    self.table[x * self.nc * self.ncp..(x + 1) * self.nc * self.ncp]
                        .iter()
                        .copied(),
                )
            })
            .collect()
    }

    /// Sub-normalized block `p(x, ·, ·)` in row-major `(c, c′)` order.
    pub fn block(&self, x: usize) -> &[f64] {
        &self.table[x * self.nc * self.ncp..(x + 1) * self.nc * self.ncp]
    }

    /// Normalized conditional `τ^x_{CC′}` (row-major `(c, c′)`); `None` when `p(x) = 0`.
    pub fn conditional_cc(&self, x: usize) -> Option<Vec<f64>> {
        let block = self.block(x);
        let px = compensated_sum(block.iter().copied());
        (px > 0.0).then(|| block.iter().map(|v| v / px).collect())
    }

    /// `τ^x_C` and `τ^x_{C′}`.
    pub fn conditional_marginals(&self, x: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        let cc = self.conditional_cc(x)?;
        Some(split_marginals(&cc, self.nc, self.ncp))
    }
}

/// Row and column marginals of a row-major `na × nb` table.
pub(crate) fn split_marginals(table: &[f64], na: usize, nb: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = (0..na)
        .map(|a| compensated_sum(table[a * nb..(a + 1) * nb].iter().copied()))
        .collect();
    let cols = (0..nb)
        .map(|b| compensated_sum((0..na).map(|a| table[a * nb + b])))
        .collect();
    (rows, cols)
}
