//! Bucketing protocol for blind compression of two commuting (classical)
//! states `p` and `q` on `d` symbols.
//!
//! Symbol `a` goes to bucket `(i, j)` where `i` is the geometric level of
//! `p(a)` and `j` the level of `q(a)`: level `i ∈ 1..=u` holds values in
//! `((1-δ)^i, (1-δ)^{i-1}]` and level `u+1` everything at or below
//! `(1-δ)^u`. The sender transmits the bucket index; the receiver outputs a
//! uniform element of the bucket.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{compensated_sum, Distribution};
use crate::error::{Error, Result};
use crate::info::{binary_entropy, fidelity, trace_distance};
use crate::random::stream_rng;

/// Copies simulated per Monte Carlo work unit.
const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BucketIndex {
    /// Level of `p(a)`, 1-based.
    pub row: usize,
    /// Level of `q(a)`, 1-based.
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketProtocol {
    delta: f64,
    gamma: f64,
    u: usize,
    buckets: BTreeMap<BucketIndex, Vec<usize>>,
    symbol_to_bucket: Vec<BucketIndex>,
}

fn check_params(delta: f64, gamma: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::ParameterOutOfRange(format!("delta = {delta} not in (0, 1/2)")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("gamma = {gamma} not in (0, 1)")));
    }
    Ok(())
}

/// `⌈log(d/γ) / log(1/(1-δ))⌉`, nudged so that `(1-δ)^u ≤ γ/d` holds in
/// floating point.
pub fn level_count(d: usize, delta: f64, gamma: f64) -> Result<usize> {
    check_params(delta, gamma)?;
    if d == 0 {
        return Err(Error::InvalidDimension("alphabet size must be at least 1".into()));
    }
    let target = gamma / d as f64;
    let ratio = (d as f64 / gamma).ln() / (1.0 / (1.0 - delta)).ln();
    let mut u = (ratio.ceil() as usize).max(1);
    while (1.0 - delta).powi(u as i32) > target {
        u += 1;
    }
    Ok(u)
}

/// Level of a probability value given thresholds `t[i] = (1-δ)^i`, `i = 0..=u`.
fn level(value: f64, thresholds: &[f64]) -> usize {
    let u = thresholds.len() - 1;
    (1..=u).find(|&i| value > thresholds[i]).unwrap_or(u + 1)
}

/// Partitions the alphabet into buckets by the levels of `p(a)` and `q(a)`.
pub fn build_protocol(rho: &Distribution, sigma: &Distribution, delta: f64, gamma: f64) -> Result<BucketProtocol> {
    if rho.d() != sigma.d() {
        return Err(Error::DimensionMismatch {
            expected: rho.d(),
            found: sigma.d(),
        });
    }
    let u = level_count(rho.d(), delta, gamma)?;
    let thresholds: Vec<f64> = (0..=u).map(|i| (1.0 - delta).powi(i as i32)).collect();
    let symbol_to_bucket: Vec<BucketIndex> = rho
        .probs()
        .iter()
        .zip(sigma.probs())
        .map(|(&p, &q)| BucketIndex {
            row: level(p, &thresholds),
            col: level(q, &thresholds),
        })
        .collect();
    Ok(BucketProtocol::from_assignment(delta, gamma, u, symbol_to_bucket))
}

impl BucketProtocol {
    fn from_assignment(delta: f64, gamma: f64, u: usize, symbol_to_bucket: Vec<BucketIndex>) -> Self {
        let mut buckets: BTreeMap<BucketIndex, Vec<usize>> = BTreeMap::new();
        for (a, &ix) in symbol_to_bucket.iter().enumerate() {
            buckets.entry(ix).or_default().push(a);
        }
        Self {
            delta,
            gamma,
            u,
            buckets,
            symbol_to_bucket,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of finite levels; indices run over `1..=u+1`.
    pub fn levels(&self) -> usize {
        self.u
    }

    pub fn d(&self) -> usize {
        self.symbol_to_bucket.len()
    }

    /// Non-empty buckets in index order.
    pub fn buckets(&self) -> &BTreeMap<BucketIndex, Vec<usize>> {
        &self.buckets
    }

    pub fn bucket(&self, ix: BucketIndex) -> Option<&[usize]> {
        self.buckets.get(&ix).map(Vec::as_slice)
    }

    pub fn encode(&self, a: usize) -> Result<BucketIndex> {
        self.symbol_to_bucket
            .get(a)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("symbol {a} outside alphabet of size {}", self.d())))
    }

    /// Uniform element of bucket `ix`, deterministic in `seed`.
    pub fn decode(&self, ix: BucketIndex, seed: u64) -> Result<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.decode_with(ix, &mut rng)
    }

    pub fn decode_with<R: rand::Rng + ?Sized>(&self, ix: BucketIndex, rng: &mut R) -> Result<usize> {
        self.bucket(ix)
            .and_then(|members| members.choose(rng).copied())
            .ok_or_else(|| Error::Protocol(format!("bucket ({}, {}) is empty", ix.row, ix.col)))
    }

    /// Number of distinct messages, `(u+1)²`.
    pub fn message_count(&self) -> usize {
        (self.u + 1) * (self.u + 1)
    }

    /// `2 log(u+1)`.
    pub fn bits_sent(&self) -> f64 {
        2.0 * ((self.u + 1) as f64).log2()
    }

    /// `⌈2 log(u+1)⌉`, the length of a fixed-length code for the index.
    pub fn bits_sent_integer(&self) -> u32 {
        self.bits_sent().ceil() as u32
    }

    /// Output distribution when the input is drawn from `input`: each
    /// bucket's mass spread uniformly over its members.
    pub fn induced_output(&self, input: &Distribution) -> Result<Distribution> {
        if input.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: input.d(),
            });
        }
        let mut out = vec![0.0; self.d()];
        for members in self.buckets.values() {
            let mass = compensated_sum(members.iter().map(|&a| input.get(a)));
            let share = mass / members.len() as f64;
            for &a in members {
                out[a] = share;
            }
        }
        Ok(Distribution::from_vec_unchecked(out))
    }

    /// Mass of `input` on symbols in level `u+1` of the given coordinate
    /// (`p` for `by_row`, `q` otherwise).
    pub fn truncation_mass(&self, input: &Distribution, by_row: bool) -> f64 {
        compensated_sum(
            self.symbol_to_bucket
                .iter()
                .enumerate()
                .filter(|(_, ix)| if by_row { ix.row } else { ix.col } == self.u + 1)
                .map(|(a, _)| input.get(a)),
        )
    }

    /// `δ/(2(1-δ))`, the spreading error allowed inside a finite-level bucket.
    pub fn spreading_error_bound(&self) -> f64 {
        self.delta / (2.0 * (1.0 - self.delta))
    }
}

#[derive(Serialize, Deserialize)]
struct BucketEntry {
    row: usize,
    col: usize,
    symbols: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct BucketTable {
    delta: f64,
    gamma: f64,
    u: usize,
    buckets: Vec<BucketEntry>,
}

impl Serialize for BucketProtocol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BucketTable {
            delta: self.delta,
            gamma: self.gamma,
            u: self.u,
            buckets: self
                .buckets
                .iter()
                .map(|(ix, symbols)| BucketEntry {
                    row: ix.row,
                    col: ix.col,
                    symbols: symbols.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BucketProtocol {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let table = BucketTable::deserialize(de)?;
        check_params(table.delta, table.gamma).map_err(D::Error::custom)?;
        let d: usize = table.buckets.iter().map(|b| b.symbols.len()).sum();
        let mut assignment: Vec<Option<BucketIndex>> = vec![None; d];
        for b in &table.buckets {
            let ix = BucketIndex { row: b.row, col: b.col };
            if !(1..=table.u + 1).contains(&b.row) || !(1..=table.u + 1).contains(&b.col) {
                return Err(D::Error::custom(format!(
                    "bucket ({}, {}) outside 1..={}",
                    b.row,
                    b.col,
                    table.u + 1
                )));
            }
            for &a in &b.symbols {
                match assignment.get_mut(a) {
                    Some(slot @ None) => *slot = Some(ix),
                    _ => {
                        return Err(D::Error::custom(format!(
                            "symbol {a} missing from or repeated in partition"
                        )))
                    }
                }
            }
        }
        let symbol_to_bucket = assignment.into_iter().map(|ix| ix.expect("all slots filled")).collect();
        Ok(BucketProtocol::from_assignment(
            table.delta,
            table.gamma,
            table.u,
            symbol_to_bucket,
        ))
    }
}

/// Sampled estimate of `Δ(input, induced)` from `n` simulated copies.
///
/// The estimator is `p̂(S) - p(S)` on the witness set
/// `S = {a : p′(a) > p(a)}` of the exact output `p′`, which is unbiased
/// for the exact distance and has standard error
/// `σ = sqrt(p′(S)(1 - p′(S))/n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCheck {
    pub copies: usize,
    pub seed: u64,
    pub exact: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// Plug-in `½ Σ |p̂ - p|`, biased upward at finite `n`.
    pub plug_in: f64,
}

impl MonteCarloCheck {
    pub fn within_sigmas(&self, k: f64) -> bool {
        (self.estimate - self.exact).abs() <= k * self.std_error
    }
}

/// Counts of protocol outputs over `n` independent copies, split into
/// chunks with their own random streams.
pub fn simulate_outputs(protocol: &BucketProtocol, input: &Distribution, n: usize, seed: u64) -> Result<Vec<u64>> {
    if input.d() != protocol.d() {
        return Err(Error::DimensionMismatch {
            expected: protocol.d(),
            found: input.d(),
        });
    }
    let d = protocol.d();
    let chunks = n.div_ceil(MC_CHUNK);
    let partial: Vec<Result<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let len = MC_CHUNK.min(n - k * MC_CHUNK);
            let mut counts = vec![0u64; d];
            for a in input.sample_with(&mut rng, len) {
                let out = protocol.decode_with(protocol.encode(a)?, &mut rng)?;
                counts[out] += 1;
            }
            Ok(counts)
        })
        .collect();
    let mut counts = vec![0u64; d];
    for chunk in partial {
        for (c, k) in counts.iter_mut().zip(chunk?) {
            *c += k;
        }
    }
    Ok(counts)
}

pub fn monte_carlo_check(
    protocol: &BucketProtocol,
    input: &Distribution,
    n: usize,
    seed: u64,
) -> Result<MonteCarloCheck> {
    if n == 0 {
        return Err(Error::ParameterOutOfRange("need at least one copy".into()));
    }
    let exact_out = protocol.induced_output(input)?;
    let exact = trace_distance(input, &exact_out)?;
    let counts = simulate_outputs(protocol, input, n, seed)?;
    let nf = n as f64;
    let witness: Vec<usize> = (0..input.d()).filter(|&a| exact_out.get(a) > input.get(a)).collect();
    let hit = witness.iter().map(|&a| counts[a]).sum::<u64>() as f64 / nf;
    let p_s = compensated_sum(witness.iter().map(|&a| input.get(a)));
    let q_s = compensated_sum(witness.iter().map(|&a| exact_out.get(a)));
    let plug_in = 0.5
        * compensated_sum(
            counts
                .iter()
                .zip(input.probs())
                .map(|(&c, &p)| (c as f64 / nf - p).abs()),
        );
    Ok(MonteCarloCheck {
        copies: n,
        seed,
        exact,
        estimate: hit - p_s,
        std_error: (q_s * (1.0 - q_s)).max(0.0).sqrt() / nf.sqrt(),
        plug_in,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub d: usize,
    pub delta: f64,
    pub gamma: f64,
    pub u: usize,
    /// `2 log(u+1)`.
    pub bits_sent: f64,
    pub bits_sent_integer: u32,
    /// `2 log log(d/γ) + 2 log(1/δ) + 3`.
    pub rate_bound: f64,
    pub induced_rho: Distribution,
    pub induced_sigma: Distribution,
    pub local_error_rho: f64,
    pub local_error_sigma: f64,
    /// Input mass on level `u+1` of its own coordinate.
    pub truncation_rho: f64,
    pub truncation_sigma: f64,
}

/// `2 log log(d/γ) + 2 log(1/δ) + 3`.
pub fn rate_bound(d: usize, delta: f64, gamma: f64) -> f64 {
    2.0 * (d as f64 / gamma).log2().log2() + 2.0 * (1.0 / delta).log2() + 3.0
}

/// Builds the protocol and evaluates its cost and exact local errors,
/// checking `bits_sent ≤ rate_bound` and both errors `≤ δ + γ`.
pub fn protocol_report(rho: &Distribution, sigma: &Distribution, delta: f64, gamma: f64) -> Result<ProtocolReport> {
    let protocol = build_protocol(rho, sigma, delta, gamma)?;
    report_for(&protocol, rho, sigma)
}

pub fn report_for(protocol: &BucketProtocol, rho: &Distribution, sigma: &Distribution) -> Result<ProtocolReport> {
    let (delta, gamma) = (protocol.delta(), protocol.gamma());
    let d = protocol.d();
    let induced_rho = protocol.induced_output(rho)?;
    let induced_sigma = protocol.induced_output(sigma)?;
    let report = ProtocolReport {
        d,
        delta,
        gamma,
        u: protocol.levels(),
        bits_sent: protocol.bits_sent(),
        bits_sent_integer: protocol.bits_sent_integer(),
        rate_bound: rate_bound(d, delta, gamma),
        local_error_rho: trace_distance(rho, &induced_rho)?,
        local_error_sigma: trace_distance(sigma, &induced_sigma)?,
        truncation_rho: protocol.truncation_mass(rho, true),
        truncation_sigma: protocol.truncation_mass(sigma, false),
        induced_rho,
        induced_sigma,
    };
    // For d = 1 the double logarithm in the rate formula can be negative.
    if d >= 2 && report.bits_sent > report.rate_bound {
        return Err(Error::InvariantViolated(format!(
            "bits sent {} exceed rate bound {}",
            report.bits_sent, report.rate_bound
        )));
    }
    let cap = delta + gamma;
    if report.local_error_rho > cap + 1e-12 || report.local_error_sigma > cap + 1e-12 {
        return Err(Error::InvariantViolated(format!(
            "local errors ({}, {}) exceed δ+γ = {cap}",
            report.local_error_rho, report.local_error_sigma
        )));
    }
    Ok(report)
}

/// Error functions of a classical channel on an equiprobable pair:
/// `f = 1 - ½(F(p, p′) + F(q, q′))` with the Bhattacharyya fidelity,
/// `λ = 1 - Σ_a r(a)/|T(a)|` for `r = (p+q)/2`, and
/// `g = H(λ) + λ log(d-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KiErrors {
    pub f: f64,
    pub lambda: f64,
    pub g: f64,
}

pub fn ki_error_functions(rho: &Distribution, sigma: &Distribution, protocol: &BucketProtocol) -> Result<KiErrors> {
    let d = protocol.d();
    if rho.d() != d || sigma.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if rho.d() != d { rho.d() } else { sigma.d() },
        });
    }
    if d < 2 {
        return Err(Error::Degenerate("g needs log(d-1) with d ≥ 2".into()));
    }
    let f = 1.0
        - 0.5 * (fidelity(rho, &protocol.induced_output(rho)?)? + fidelity(sigma, &protocol.induced_output(sigma)?)?);
    let kept = compensated_sum(protocol.buckets().values().flat_map(|members| {
        let size = members.len() as f64;
        members.iter().map(move |&a| 0.5 * (rho.get(a) + sigma.get(a)) / size)
    }));
    let lambda = (1.0 - kept).clamp(0.0, 1.0);
    let g = binary_entropy(lambda) + lambda * ((d - 1) as f64).log2();
    Ok(KiErrors {
        f: f.max(0.0),
        lambda,
        g,
    })
}

/// `log²d / √d`.
pub fn ki_sensitivity_parameter(d: usize) -> f64 {
    let df = d as f64;
    df.log2().powi(2) / df.sqrt()
}

/// Error functions of the bucketing protocol on the uniform/staircase pair
/// with `δ = γ = log²d/√d`.
pub fn ki_sensitivity(d: usize) -> Result<KiErrors> {
    let rho = Distribution::uniform(d)?;
    let sigma = Distribution::staircase(d)?;
    let t = ki_sensitivity_parameter(d);
    let protocol = build_protocol(&rho, &sigma, t, t)?;
    ki_error_functions(&rho, &sigma, &protocol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn level_count_examples() {
        assert_eq!(level_count(2, 0.4, 0.5).unwrap(), 3);
        assert_eq!(level_count(1024, 0.1, 0.1).unwrap(), 88);
        assert!(level_count(4, 0.5, 0.1).is_err());
        assert!(level_count(4, 0.1, 1.0).is_err());
    }

    #[test]
    fn two_symbol_uniform_lands_in_level_two() {
        let u2 = Distribution::uniform(2).unwrap();
        let p = build_protocol(&u2, &u2, 0.4, 0.5).unwrap();
        let ix = BucketIndex { row: 2, col: 2 };
        assert_eq!(p.encode(0).unwrap(), ix);
        assert_eq!(p.bucket(ix).unwrap(), &[0, 1]);
        assert_eq!(p.buckets().len(), 1);
        // One bucket spreads any input uniformly.
        let skew = Distribution::new(vec![0.9, 0.1]).unwrap();
        let out = p.induced_output(&skew).unwrap();
        assert_abs_diff_eq!(out.get(0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn point_mass_is_in_first_row() {
        let pm = Distribution::point_mass(3, 1).unwrap();
        let p = build_protocol(&pm, &Distribution::uniform(3).unwrap(), 0.2, 0.3).unwrap();
        assert_eq!(p.encode(1).unwrap().row, 1);
        assert_eq!(p.encode(0).unwrap().row, p.levels() + 1);
        assert!(p.encode(3).is_err());
    }

    #[test]
    fn interval_is_closed_above() {
        // p = 0.5 = (1-δ)^1 with δ = 0.5 is out of range, so use δ = 0.25:
        // (0.75)^1 = 0.75 exactly.
        let rho = Distribution::new(vec![0.75, 0.25]).unwrap();
        let p = build_protocol(&rho, &rho, 0.25, 0.5).unwrap();
        assert_eq!(p.encode(0).unwrap().row, 2);
    }

    #[test]
    fn singletons_reproduce_the_input() {
        let rho = Distribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let p = build_protocol(&rho, &rho, 0.1, 0.1).unwrap();
        assert!(p.buckets().values().all(|b| b.len() == 1));
        assert_eq!(p.induced_output(&rho).unwrap(), rho);
        let k = ki_error_functions(&rho, &rho, &p).unwrap();
        assert_eq!((k.f, k.lambda, k.g), (0.0, 0.0, 0.0));
    }

    #[test]
    fn decode_examples() {
        let u2 = Distribution::uniform(2).unwrap();
        let p = build_protocol(&u2, &u2, 0.4, 0.5).unwrap();
        let ix = BucketIndex { row: 2, col: 2 };
        assert_eq!(p.decode(ix, 9).unwrap(), p.decode(ix, 9).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let ones = (0..n).filter(|_| p.decode_with(ix, &mut rng).unwrap() == 1).count() as f64;
        let sigma = (0.25f64 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() <= 3.0 * sigma);
        assert!(matches!(
            p.decode(BucketIndex { row: 1, col: 1 }, 0),
            Err(Error::Protocol(_))
        ));

        let single = build_protocol(
            &Distribution::point_mass(1, 0).unwrap(),
            &Distribution::point_mass(1, 0).unwrap(),
            0.1,
            0.1,
        )
        .unwrap();
        assert_eq!(single.decode(single.encode(0).unwrap(), 3).unwrap(), 0);
    }

    #[test]
    fn uniform_staircase_report() {
        let rho = Distribution::uniform(1024).unwrap();
        let sigma = Distribution::staircase(1024).unwrap();
        let r = protocol_report(&rho, &sigma, 0.1, 0.1).unwrap();
        assert_eq!(r.u, 88);
        assert_abs_diff_eq!(r.bits_sent, 2.0 * 89f64.log2(), epsilon = 1e-12);
        assert!(r.bits_sent <= r.rate_bound);
        assert_eq!(r.bits_sent_integer, 13);
        assert!(r.local_error_rho <= 0.2 && r.local_error_sigma <= 0.2);
    }

    #[test]
    fn symmetric_inputs_give_symmetric_report() {
        let rho = Distribution::staircase(50).unwrap();
        let r = protocol_report(&rho, &rho, 0.2, 0.3).unwrap();
        assert_eq!(r.local_error_rho, r.local_error_sigma);
        assert_eq!(r.induced_rho, r.induced_sigma);
    }

    #[test]
    fn json_table_round_trip() {
        let rho = Distribution::uniform(6).unwrap();
        let sigma = Distribution::staircase(6).unwrap();
        let p = build_protocol(&rho, &sigma, 0.3, 0.2).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.starts_with(r#"{"delta":0.3,"gamma":0.2,"u":"#));
        let back: BucketProtocol = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let broken = json.replacen("[0", "[1", 1);
        assert!(serde_json::from_str::<BucketProtocol>(&broken).is_err());
    }

    #[test]
    fn ki_on_tiny_alphabet_is_degenerate() {
        let one = Distribution::point_mass(1, 0).unwrap();
        let p = build_protocol(&one, &one, 0.1, 0.1).unwrap();
        assert!(matches!(ki_error_functions(&one, &one, &p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sensitivity_parameter_leaves_range_at_4096() {
        assert_eq!(ki_sensitivity_parameter(4096), 2.25);
        assert!(matches!(ki_sensitivity(4096), Err(Error::ParameterOutOfRange(_))));
    }
}
