//! Randomised audits of the inequalities the bounds rest on.
//!
//! Every suite draws instance `k` from its own ChaCha stream
//! `(seed + salt, k)`, so results are identical for any thread count.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, ExactDistribution, JointDistribution};
use crate::error::{Error, Result};
use crate::info::{
    cond_mutual_info_cc_given_x, l1_distance, pair_conditional_entropy, pair_mutual_information, relative_entropy,
};
use crate::lp::l1_distance_to_hull;
use crate::random::{
    random_channel, random_distribution, random_doubly_stochastic, random_permutation, random_permutation_mixture,
    random_stochastic, stream_rng,
};
use crate::stochastic::{
    admissible_epsilon, approx_doubly_stochastic, birkhoff_decompose, diagonal_floor, l1_dist_to_hull_lower_bound,
    perm_overlap_max, permutation_overlap, StochasticMatrix,
};

/// Slack for floating-point comparisons in the audits.
pub const AUDIT_SLACK: f64 = 1e-12;
/// Slack for the information-theoretic fact suites.
pub const FACT_SLACK: f64 = 1e-10;
/// Reconstruction tolerance for Birkhoff decompositions.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Multiplier of `dε` in the doubly stochastic approximation bounds.
pub const APPROXIMATION_CONSTANT: f64 = 12.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub suite: String,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `bound - measured` seen; negative iff some check failed.
    pub worst_margin: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn from_margins(suite: &str, margins: &[f64]) -> Self {
        Self {
            suite: suite.into(),
            instances: margins.len(),
            violations: margins.iter().filter(|m| m.is_nan() || **m < 0.0).count(),
            worst_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
            extra: BTreeMap::new(),
        }
    }
}

fn trial_rng(seed: u64, salt: u64, trial: usize) -> ChaCha8Rng {
    stream_rng(seed.wrapping_add(salt), trial as u64)
}

fn pick_dim(rng: &mut ChaCha8Rng, dims: &RangeInclusive<usize>) -> usize {
    rng.random_range(dims.clone())
}

/// Channels that nearly fix the uniform and staircase distributions, mixed
/// with generic ones.
fn audit_channel(rng: &mut ChaCha8Rng, d: usize, trial: usize) -> StochasticMatrix {
    let id = StochasticMatrix::identity(d);
    let t = 10f64.powf(-rng.random_range(0.0..9.0));
    match trial % 4 {
        0 => random_channel(rng, d),
        1 => StochasticMatrix::mix(&id, &random_channel(rng, d), t).expect("same size"),
        2 => StochasticMatrix::mix(&id, &StochasticMatrix::from_permutation(&random_permutation(rng, d)), t)
            .expect("same size"),
        _ => StochasticMatrix::mix(&id, &random_permutation_mixture(rng, d, 3), t).expect("same size"),
    }
}

fn check_dims(dims: &RangeInclusive<usize>, min: usize) -> Result<()> {
    if *dims.start() < min || dims.is_empty() {
        return Err(Error::InvalidDimension(format!(
            "dimension range {dims:?} must start at {min} or more"
        )));
    }
    Ok(())
}

/// Doubly stochastic approximation of random channels: column sums, the
/// `constant·dε` entrywise and `‖vN - vM‖₁` bounds, and
/// `‖v - vN‖₁ ≤ (constant + 4)dε`, with `ε = max(‖u-uM‖₁, ‖v-vM‖₁)/4`.
///
/// `constant` is [`APPROXIMATION_CONSTANT`] except when testing that the audit
/// catches a wrong one.
pub fn approximation_audit(
    seed: u64,
    trials: usize,
    dims: RangeInclusive<usize>,
    constant: f64,
) -> Result<AuditOutcome> {
    check_dims(&dims, 2)?;
    let results: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, 0x11, k);
            let d = pick_dim(&mut rng, &dims);
            let m = audit_channel(&mut rng, d, k);
            let eps = admissible_epsilon(&m);
            let n = approx_doubly_stochastic(&m, eps).expect("eps chosen admissible");
            let v = Distribution::staircase(d).expect("d ≥ 2");
            let vm = m.apply_slice(v.probs());
            let vn = n.apply_slice(v.probs());
            let de = d as f64 * eps;
            let entry = n.max_abs_diff(&m);
            let margins = [
                AUDIT_SLACK - n.doubly_stochastic_defect(),
                n.entries().iter().copied().fold(f64::INFINITY, f64::min) + AUDIT_SLACK,
                constant * de + AUDIT_SLACK - entry,
                constant * de + AUDIT_SLACK - l1_distance(&vn, &vm),
                (constant + 4.0) * de + AUDIT_SLACK - l1_distance(v.probs(), &vn),
            ];
            let ratio = if de > 0.0 { entry / de } else { 0.0 };
            (margins.into_iter().fold(f64::INFINITY, f64::min), ratio)
        })
        .collect();
    let margins: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut out = AuditOutcome::from_margins("doubly-stochastic-approximation", &margins);
    out.extra.insert("constant".into(), constant);
    out.extra.insert(
        "max_entry_ratio".into(),
        results.iter().map(|r| r.1).fold(0.0, f64::max),
    );
    Ok(out)
}

/// Diagonal rigidity `M_{c,c} ≥ 1 - 24d⁴ε` for channels with both
/// fixed-point residuals at most `4ε`.
pub fn rigidity_audit(seed: u64, trials: usize, dims: RangeInclusive<usize>) -> Result<AuditOutcome> {
    check_dims(&dims, 2)?;
    let margins: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, 0x22, k);
            let d = pick_dim(&mut rng, &dims);
            let m = audit_channel(&mut rng, d, k);
            let eps = admissible_epsilon(&m);
            let floor = diagonal_floor(d, eps);
            m.diagonal()
                .into_iter()
                .map(|x| x - floor + AUDIT_SLACK)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(AuditOutcome::from_margins("diagonal-rigidity", &margins))
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(d), &mut vec![false; d], &mut out);
    out
}

/// Exhaustive check that the closed-form maximum overlap of the staircase
/// with its non-trivial permutations is exact, for every `d` in `dims`.
pub fn overlap_audit(dims: RangeInclusive<usize>) -> Result<AuditOutcome> {
    check_dims(&dims, 2)?;
    if *dims.end() > 8 {
        return Err(Error::ParameterOutOfRange(
            "permutation enumeration limited to d ≤ 8".into(),
        ));
    }
    let mut mismatches = 0;
    let mut count = 0;
    for d in dims {
        let v = ExactDistribution::staircase(d)?;
        let closed = perm_overlap_max(&v)?;
        let brute = permutations(d)
            .into_par_iter()
            .filter(|p| p.iter().enumerate().any(|(c, &x)| c != x))
            .map(|p| permutation_overlap(v.probs(), &p))
            .max()
            .expect("d ≥ 2 has a non-identity permutation");
        count += 1;
        if brute != closed {
            mismatches += 1;
        }
    }
    Ok(AuditOutcome {
        suite: "permutation-overlap".into(),
        instances: count,
        violations: mismatches,
        worst_margin: if mismatches == 0 { 0.0 } else { -1.0 },
        extra: BTreeMap::new(),
    })
}

fn random_rational_distribution(rng: &mut ChaCha8Rng, d: usize) -> ExactDistribution {
    let weights: Vec<i64> = (0..d).map(|_| rng.random_range(0..=20)).collect();
    let total: i64 = weights.iter().sum();
    if total == 0 {
        return ExactDistribution::uniform(d).expect("d ≥ 1");
    }
    ExactDistribution::new(
        weights
            .into_iter()
            .map(|w| BigRational::new(BigInt::from(w), BigInt::from(total)))
            .collect(),
    )
    .expect("weights normalised")
}

/// The hull-distance lower bound never exceeds the exact LP distance.
/// Half the instances use the staircase against its own permutations.
pub fn hull_bound_audit(
    seed: u64,
    instances: usize,
    dims: RangeInclusive<usize>,
    max_vertices: usize,
) -> Result<AuditOutcome> {
    check_dims(&dims, 2)?;
    if max_vertices == 0 {
        return Err(Error::ParameterOutOfRange("need at least one hull vertex".into()));
    }
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = trial_rng(seed, 0x33, k);
            let d = pick_dim(&mut rng, &dims);
            let count = rng.random_range(1..=max_vertices);
            let (v, ws) = if k % 2 == 0 {
                let v = ExactDistribution::staircase(d)?;
                let ws = (0..count)
                    .map(|_| {
                        let mut p = random_permutation(&mut rng, d);
                        if p.iter().enumerate().all(|(c, &x)| c == x) {
                            p.swap(0, 1);
                        }
                        let mut w = vec![BigRational::default(); d];
                        for (c, &cp) in p.iter().enumerate() {
                            w[cp] = v.probs()[c].clone();
                        }
                        ExactDistribution::new(w)
                    })
                    .collect::<Result<Vec<_>>>()?;
                (v, ws)
            } else {
                let v = random_rational_distribution(&mut rng, d);
                let ws = (0..count).map(|_| random_rational_distribution(&mut rng, d)).collect();
                (v, ws)
            };
            let bound = l1_dist_to_hull_lower_bound(&v, &ws)?;
            let raw: Vec<Vec<BigRational>> = ws.iter().map(|w| w.probs().to_vec()).collect();
            let lp = l1_distance_to_hull(v.probs(), &raw).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let gap = lp.objective - bound;
            Ok(crate::dist::rational_to_f64(&gap).unwrap_or(f64::NAN))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditOutcome::from_margins("hull-distance-bound", &margins))
}

/// Greedy Birkhoff decompositions of random doubly stochastic matrices:
/// reconstruction error and permutation count `≤ (d-1)² + 1`.
pub fn birkhoff_audit(seed: u64, trials: usize, dims: RangeInclusive<usize>) -> Result<AuditOutcome> {
    check_dims(&dims, 1)?;
    let results: Vec<(f64, usize)> = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<(f64, usize)> {
            let mut rng = trial_rng(seed, 0x44, k);
            let d = pick_dim(&mut rng, &dims);
            let m = match k % 3 {
                0 => random_doubly_stochastic(&mut rng, d),
                1 => {
                    let terms = rng.random_range(1..=2 * d);
                    random_permutation_mixture(&mut rng, d, terms)
                }
                _ => {
                    let dense = random_doubly_stochastic(&mut rng, d);
                    let sparse = random_permutation_mixture(&mut rng, d, 2);
                    StochasticMatrix::mix(&dense, &sparse, 0.9).expect("same size")
                }
            };
            let dec = birkhoff_decompose(&m)?;
            let err = dec
                .reconstruct()
                .iter()
                .zip(m.entries())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let limit = (d - 1) * (d - 1) + 1;
            let weight_err = (dec.weights.iter().sum::<f64>() - 1.0).abs();
            let margin = (RECONSTRUCTION_TOL - err)
                .min(RECONSTRUCTION_TOL - weight_err)
                .min(if dec.len() <= limit { 0.0 } else { -1.0 })
                .min(if dec.weights.iter().all(|&q| q > 0.0) {
                    0.0
                } else {
                    -1.0
                });
            Ok((margin, dec.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let margins: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut out = AuditOutcome::from_margins("birkhoff-decomposition", &margins);
    out.extra.insert(
        "max_permutations".into(),
        results.iter().map(|r| r.1).max().unwrap_or(0) as f64,
    );
    Ok(out)
}

fn random_joint(rng: &mut ChaCha8Rng, na: usize, nb: usize) -> Vec<f64> {
    random_distribution(rng, na * nb).probs().to_vec()
}

/// `(Σ_a p(a) E(a, ·))` for a row-major `na × nb` channel.
fn push_through(p: &[f64], channel: &[Vec<f64>]) -> Vec<f64> {
    let nb = channel[0].len();
    (0..nb)
        .map(|b| p.iter().zip(channel).map(|(pa, row)| pa * row[b]).sum())
        .collect()
}

fn fact_suite<F>(name: &str, seed: u64, salt: u64, trials: usize, check: F) -> AuditOutcome
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let margins: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| check(&mut trial_rng(seed, salt, k)))
        .collect();
    AuditOutcome::from_margins(name, &margins)
}

/// Property suites for the standard information-theoretic facts used by
/// the bounds, each on `trials` random instances with alphabets of size 2 to 6.
pub fn facts_audit(seed: u64, trials: usize) -> Vec<AuditOutcome> {
    let dim = |rng: &mut ChaCha8Rng| rng.random_range(2..=6usize);
    let tv = |a: &[f64], b: &[f64]| l1_distance(a, b) / 2.0;
    vec![
        fact_suite("triangle-inequality", seed, 0x51, trials, |rng| {
            let d = dim(rng);
            let (p, q, r) = (
                random_distribution(rng, d),
                random_distribution(rng, d),
                random_distribution(rng, d),
            );
            tv(p.probs(), r.probs()) + tv(r.probs(), q.probs()) - tv(p.probs(), q.probs()) + FACT_SLACK
        }),
        fact_suite("data-processing-tv", seed, 0x52, trials, |rng| {
            let (na, nb) = (dim(rng), dim(rng));
            let (p, q) = (random_distribution(rng, na), random_distribution(rng, na));
            let e = random_stochastic(rng, na, nb);
            tv(p.probs(), q.probs()) - tv(&push_through(p.probs(), &e), &push_through(q.probs(), &e)) + FACT_SLACK
        }),
        fact_suite("data-processing-kl", seed, 0x53, trials, |rng| {
            let (na, nb) = (dim(rng), dim(rng));
            let (p, q) = (random_distribution(rng, na), random_distribution(rng, na));
            let e = random_stochastic(rng, na, nb);
            let before = relative_entropy(p.probs(), q.probs()).unwrap_or(f64::INFINITY);
            let after =
                relative_entropy(&push_through(p.probs(), &e), &push_through(q.probs(), &e)).unwrap_or(f64::NAN);
            before - after + FACT_SLACK
        }),
        fact_suite("data-processing-mutual-information", seed, 0x54, trials, |rng| {
            let (na, nb, nc) = (dim(rng), dim(rng), dim(rng));
            let joint = random_joint(rng, na, nc);
            let e = random_stochastic(rng, na, nb);
            let mut pushed = vec![0.0; nb * nc];
            for a in 0..na {
                for c in 0..nc {
                    for (b, w) in e[a].iter().enumerate() {
                        pushed[b * nc + c] += joint[a * nc + c] * w;
                    }
                }
            }
            pair_mutual_information(&joint, na, nc) - pair_mutual_information(&pushed, nb, nc) + FACT_SLACK
        }),
        fact_suite("pinsker", seed, 0x55, trials, |rng| {
            let d = dim(rng);
            let (p, q) = (random_distribution(rng, d), random_distribution(rng, d));
            let kl = relative_entropy(p.probs(), q.probs()).unwrap_or(f64::INFINITY);
            0.5 * kl - tv(p.probs(), q.probs()).powi(2) + FACT_SLACK
        }),
        fact_suite("fano", seed, 0x56, trials, |rng| {
            let n = dim(rng);
            let joint = random_joint(rng, n, n);
            let miss = 1.0 - (0..n).map(|a| joint[a * n + a]).sum::<f64>();
            1.0 + miss * (n as f64).log2() - pair_conditional_entropy(&joint, n, n) + FACT_SLACK
        }),
        fact_suite("dimension-bound", seed, 0x57, trials, |rng| {
            let (nb, na, nx) = (dim(rng), dim(rng), dim(rng));
            // Axes (b, a, x): the label axis is B, so this is I(A:X|B).
            let t = JointDistribution::new(nb, na, nx, random_joint(rng, nb * na, nx)).expect("normalised");
            (nx as f64).log2() - cond_mutual_info_cc_given_x(&t).0 + FACT_SLACK
        }),
        fact_suite("afw-conditional-entropy", seed, 0x58, trials, |rng| {
            let (na, nb) = (dim(rng), dim(rng));
            let (rho, sigma) = same_b_marginal_pair(rng, na, nb);
            let lhs = (pair_conditional_entropy(&rho, na, nb) - pair_conditional_entropy(&sigma, na, nb)).abs();
            tv(&rho, &sigma) * (na as f64).log2() + 1.0 - lhs + FACT_SLACK
        }),
        fact_suite("afw-mutual-information", seed, 0x59, trials, |rng| {
            let (na, nb) = (dim(rng), dim(rng));
            let (rho, sigma) = same_b_marginal_pair(rng, na, nb);
            let lhs = (pair_mutual_information(&rho, na, nb) - pair_mutual_information(&sigma, na, nb)).abs();
            tv(&rho, &sigma) * (nb as f64).log2() + 1.0 - lhs + FACT_SLACK
        }),
    ]
}

/// Two joints on `A × B` with equal `B` marginals.
fn same_b_marginal_pair(rng: &mut ChaCha8Rng, na: usize, nb: usize) -> (Vec<f64>, Vec<f64>) {
    let rho = random_joint(rng, na, nb);
    let pb: Vec<f64> = (0..nb).map(|b| (0..na).map(|a| rho[a * nb + b]).sum()).collect();
    let mut sigma = vec![0.0; na * nb];
    for (b, mass) in pb.iter().enumerate() {
        let cond = random_distribution(rng, na);
        for a in 0..na {
            sigma[a * nb + b] = mass * cond.get(a);
        }
    }
    (rho, sigma)
}

/// Parameters for [`run_audits`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub seed: u64,
    pub trials: usize,
    pub d_max: usize,
    pub approximation_constant: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            d_max: 6,
            approximation_constant: APPROXIMATION_CONSTANT,
        }
    }
}

/// Every suite at the given trial count, with `d` up to `d_max`.
pub fn run_audits(cfg: &AuditConfig) -> Result<Vec<AuditOutcome>> {
    if cfg.d_max < 2 {
        return Err(Error::InvalidDimension("d_max must be at least 2".into()));
    }
    if cfg.d_max > 7 {
        return Err(Error::ParameterOutOfRange(
            "d_max above 7 makes permutation enumeration too slow".into(),
        ));
    }
    let dims = 2..=cfg.d_max;
    let mut out = vec![
        approximation_audit(cfg.seed, cfg.trials, dims.clone(), cfg.approximation_constant)?,
        rigidity_audit(cfg.seed, cfg.trials, dims.clone())?,
        hull_bound_audit(cfg.seed, cfg.trials.min(100), dims.clone(), 8)?,
        overlap_audit(dims.clone())?,
        birkhoff_audit(cfg.seed, cfg.trials, 3..=cfg.d_max.max(3))?,
    ];
    out.extend(facts_audit(cfg.seed, cfg.trials));
    Ok(out)
}
