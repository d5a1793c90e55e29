//! Lower bounds on the blind compression rate.
//!
//! [`mixedlb_rate`] turns an information defect `min I(C:C′|X)` into a rate
//! bound, [`genlowb_bound`] lower-bounds the defect from the diagonal of the
//! copying channel, [`pinskerlb_chain`] evaluates the two-state Pinsker
//! chain, and [`separation_pipeline`] assembles all of it for the
//! uniform/staircase ensemble.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::{compensated_sum, ClassicalEnsemble, ExactDistribution, JointDistribution};
use crate::error::{Error, Result};
use crate::info::{conditional_entropy_c_given_x, half_l1, holevo_information, trace_distance_exact, Bits};
use crate::stochastic::{diagonal_floor, StochasticMatrix};

/// Slack applied when checking each step of the Pinsker chain.
pub const CHAIN_SLACK: f64 = 1e-10;
/// Tolerance on the exact-marginal and common-channel preconditions.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
    /// Which argument produced the term.
    pub source: String,
}

impl BoundTerm {
    fn new(name: &str, value: f64, source: &str) -> Self {
        Self {
            name: name.into(),
            value,
            source: source.into(),
        }
    }
}

/// A rate lower bound in bits per copy with its additive breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub value: f64,
    pub epsilon: f64,
    /// Summands of `value`, in order.
    pub components: Vec<BoundTerm>,
    /// `value < 0`; such bounds are reported unclamped.
    pub vacuous: bool,
    /// Quantities computed along the way that do not enter `value`.
    pub diagnostics: Vec<BoundTerm>,
}

impl RateBound {
    fn assemble(epsilon: f64, components: Vec<BoundTerm>, diagnostics: Vec<BoundTerm>) -> Self {
        let value = components.iter().map(|t| t.value).sum::<f64>();
        Self {
            value,
            epsilon,
            components,
            vacuous: value < 0.0,
            diagnostics,
        }
    }

    /// Sum of the components, recomputed.
    pub fn recombined(&self) -> f64 {
        self.components.iter().map(|t| t.value).sum()
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} not in [0, 1)")));
    }
    Ok(())
}

/// Fano-type defect bound for a copying channel `M`:
/// `S(C|X) - 2 - (1 - Σ_c p_C(c) M_{c,c} + ε) log d`.
pub fn genlowb_bound(e: &ClassicalEnsemble, m: &StochasticMatrix, eps: f64) -> Result<Bits> {
    let d = e.d();
    if m.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.d(),
        });
    }
    check_eps(eps)?;
    let pc = e.average();
    let kept = compensated_sum(pc.probs().iter().zip(m.diagonal()).map(|(p, mcc)| p * mcc));
    let s = conditional_entropy_c_given_x(e).0;
    Ok(Bits(s - 2.0 - (1.0 - kept + eps) * (d as f64).log2()))
}

/// Rate bound `defect + I(X:C) - ε log|X| - 1`.
pub fn mixedlb_rate(e: &ClassicalEnsemble, defect: Bits, eps: f64) -> Result<RateBound> {
    if defect.0.is_nan() || defect.0 < 0.0 {
        return Err(Error::ParameterOutOfRange(format!("defect = {} must be ≥ 0", defect.0)));
    }
    check_eps(eps)?;
    let holevo = holevo_information(e).0;
    let labels = (e.labels() as f64).log2();
    Ok(RateBound::assemble(
        eps,
        vec![
            BoundTerm::new("defect", defect.0, "information defect"),
            BoundTerm::new("holevo", holevo, "holevo information I(X:C)"),
            BoundTerm::new("error_penalty", -eps * labels, "continuity in eps"),
            BoundTerm::new("constant", -1.0, "entanglement-assisted rate bound"),
        ],
        Vec::new(),
    ))
}

/// The six quantities of the two-state Pinsker chain, each a lower bound
/// for the one before it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    /// `√I(C:C′|X)`.
    pub a: f64,
    /// `√(Δ₀² + Δ₁²)` with `Δ_x = Δ(τ^x_{CC′}, τ^x_C ⊗ τ^x_{C′})`.
    pub b: f64,
    /// `(Δ₀ + Δ₁)/√2`.
    pub c: f64,
    /// `(Δ(τ⁰_C⊗τ⁰_{C′}, τ¹_C⊗τ¹_{C′}) - Δ(τ⁰_{CC′}, τ¹_{CC′}))/√2`.
    pub d: f64,
    /// `(Δ(ρ⁰⊗ρ⁰, ρ¹⊗ρ¹) - Δ(τ⁰_{CC′}, τ¹_{CC′}) - 2ε)/√2`.
    pub e: f64,
    /// `(Δ(ρ⁰⊗ρ⁰, ρ¹⊗ρ¹) - Δ(ρ⁰, ρ¹) - 2ε)/√2`.
    pub f: f64,
    pub epsilon: f64,
}

impl ChainReport {
    pub fn values(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    /// `I(C:C′|X) ≥ f²` when `f > 0`; zero otherwise.
    pub fn defect_lower_bound(&self) -> f64 {
        self.f.max(0.0).powi(2)
    }

    pub fn vacuous(&self) -> bool {
        self.f <= 0.0
    }
}

fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Closed form of the chain endpoint squared, `max(0, gap - 2ε)² / 2`, where
/// `gap = Δ(ρ⁰⊗ρ⁰, ρ¹⊗ρ¹) - Δ(ρ⁰, ρ¹)`.
pub fn chain_bound_from_gap(gap: f64, eps: f64) -> f64 {
    (gap - 2.0 * eps).max(0.0).powi(2) / 2.0
}

/// Evaluates the Pinsker chain for two equiprobable states and a joint
/// `τ(x, c, c′)` produced from them by a common channel.
///
/// Preconditions: `τ^x_C = ρ^x`, `½ Σ_x Δ(τ^x_{C′}, ρ^x) ≤ ε`, and the
/// conditional `τ(c′ | x, c)` does not depend on `x` wherever it is defined.
pub fn pinskerlb_chain(e: &ClassicalEnsemble, t: &JointDistribution, eps: f64) -> Result<ChainReport> {
    if !e.is_equiprobable_pair() {
        return Err(Error::Unsupported("chain needs two equiprobable states".into()));
    }
    check_eps(eps)?;
    let d = e.d();
    let (nx, nc, ncp) = t.shape();
    if nx != 2 || nc != d || ncp != d {
        return Err(Error::InvalidInput(format!(
            "joint shape ({nx}, {nc}, {ncp}) does not match (2, {d}, {d})"
        )));
    }
    let rho = e.conditionals();
    let labels = t.label_marginal();
    let label_dev = labels.iter().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
    if label_dev > MARGINAL_TOL {
        return Err(Error::violated("τ_X equiprobable", label_dev));
    }
    let mut tau = Vec::with_capacity(2);
    let mut marginal_dev = 0.0f64;
    let mut closeness = 0.0;
    for (x, rho_x) in rho.iter().enumerate() {
        let cc = t.conditional_cc(x).expect("label mass 1/2");
        let (tc, tcp) = crate::dist::split_marginals(&cc, d, d);
        marginal_dev = tc
            .iter()
            .zip(rho_x.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(marginal_dev, f64::max);
        closeness += 0.5 * half_l1(&tcp, rho_x.probs());
        tau.push((cc, tc, tcp));
    }
    if marginal_dev > MARGINAL_TOL {
        return Err(Error::violated("τ^x_C = ρ^x", marginal_dev));
    }
    if closeness > eps + 1e-12 {
        return Err(Error::violated("½ Σ_x Δ(τ^x_C′, ρ^x) ≤ ε", closeness));
    }
    let mut channel_dev = 0.0f64;
    for c in 0..d {
        let (p0, p1) = (rho[0].get(c), rho[1].get(c));
        if p0 <= 0.0 || p1 <= 0.0 {
            continue;
        }
        for cp in 0..d {
            let r0 = tau[0].0[c * d + cp] / p0;
            let r1 = tau[1].0[c * d + cp] / p1;
            channel_dev = channel_dev.max((r0 - r1).abs());
        }
    }
    if channel_dev > MARGINAL_TOL {
        return Err(Error::violated("τ(c′|x,c) independent of x", channel_dev));
    }

    let s2 = std::f64::consts::SQRT_2;
    let deltas: Vec<f64> = tau.iter().map(|(cc, tc, tcp)| half_l1(cc, &outer(tc, tcp))).collect();
    let cmi = crate::info::cond_mutual_info_cc_given_x(t).0;
    let joint_gap = half_l1(&tau[0].0, &tau[1].0);
    let tau_products = half_l1(&outer(&tau[0].1, &tau[0].2), &outer(&tau[1].1, &tau[1].2));
    let rho_products = half_l1(
        &outer(rho[0].probs(), rho[0].probs()),
        &outer(rho[1].probs(), rho[1].probs()),
    );
    let rho_gap = half_l1(rho[0].probs(), rho[1].probs());
    let report = ChainReport {
        a: cmi.sqrt(),
        b: (deltas[0].powi(2) + deltas[1].powi(2)).sqrt(),
        c: (deltas[0] + deltas[1]) / s2,
        d: (tau_products - joint_gap) / s2,
        e: (rho_products - joint_gap - 2.0 * eps) / s2,
        f: (rho_products - rho_gap - 2.0 * eps) / s2,
        epsilon: eps,
    };
    let v = report.values();
    for (i, w) in v.windows(2).enumerate() {
        if w[0] + CHAIN_SLACK < w[1] {
            let names = ["a", "b", "c", "d", "e", "f"];
            return Err(Error::InvariantViolated(format!(
                "chain step ({}) = {} < ({}) = {}",
                names[i],
                w[0],
                names[i + 1],
                w[1]
            )));
        }
    }
    Ok(report)
}

/// Exact values for the pair `(1/2, 1/2)` and `(1/3, 2/3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStateExample {
    pub single_copy: BigRational,
    pub two_copy: BigRational,
    pub gap: BigRational,
    pub epsilon: BigRational,
    /// `max(0, gap - 2ε)² / 2`, which is `(1 - 72ε)²/2592` for `ε ≤ 1/72`.
    pub defect_bound: BigRational,
}

pub fn two_state_example(eps: &BigRational) -> Result<TwoStateExample> {
    if eps.is_negative() {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} must be ≥ 0")));
    }
    let p = ExactDistribution::uniform(2)?;
    let r = ExactDistribution::from_ratios(&[(1, 3), (2, 3)])?;
    let single_copy = trace_distance_exact(&p, &r)?;
    let two_copy = trace_distance_exact(&p.product(&p), &r.product(&r))?;
    let gap = &two_copy - &single_copy;
    let slack = &gap - eps * BigInt::from(2);
    let defect_bound = if slack.is_positive() {
        &slack * &slack / BigInt::from(2)
    } else {
        BigRational::zero()
    };
    Ok(TwoStateExample {
        single_copy,
        two_copy,
        gap,
        epsilon: eps.clone(),
        defect_bound,
    })
}

/// `ε = 1/(24 d⁴ log d)`.
pub fn separation_epsilon(d: usize) -> f64 {
    let df = d as f64;
    1.0 / (24.0 * df.powi(4) * df.log2())
}

/// Full separation argument for the uniform/staircase ensemble at size `d`.
///
/// With `ε = 1/(24 d⁴ log d)` the rigidity bound gives `M_{c,c} ≥ 1 - 1/log d`,
/// the Fano bound then gives a defect of at least `log d - 5`, and the rate
/// bound adds the Holevo term (at least 0), the error penalty (at least -1)
/// and the constant -1, for `log d - 7` in total. The computed Holevo
/// information, `S(C|X)` and the unrounded intermediate values are reported
/// as diagnostics.
pub fn separation_pipeline(d: usize) -> Result<RateBound> {
    if d < 2 {
        return Err(Error::InvalidDimension("need d ≥ 2".into()));
    }
    let e = ClassicalEnsemble::uniform_staircase(d)?;
    let eps = separation_epsilon(d);
    let log_d = (d as f64).log2();
    let floor = diagonal_floor(d, eps);
    let s_cx = conditional_entropy_c_given_x(&e).0;
    let holevo = holevo_information(&e).0;
    let fano_at_floor = s_cx - 2.0 - (1.0 - floor + eps) * log_d;
    let penalty = eps * (e.labels() as f64).log2();

    let components = vec![
        BoundTerm::new("defect", log_d - 5.0, "fano bound with diagonal rigidity"),
        BoundTerm::new("holevo", 0.0, "holevo information is nonnegative"),
        BoundTerm::new("error_penalty", -1.0, "eps·log|X| ≤ 1"),
        BoundTerm::new("constant", -1.0, "entanglement-assisted rate bound"),
    ];
    let diagnostics = vec![
        BoundTerm::new("epsilon", eps, "1/(24 d^4 log d)"),
        BoundTerm::new("diagonal_floor", floor, "1 - 24 d^4 eps"),
        BoundTerm::new("conditional_entropy", s_cx, "S(C|X)"),
        BoundTerm::new("holevo_computed", holevo, "I(X:C)"),
        BoundTerm::new("defect_at_floor", fano_at_floor, "fano bound at the diagonal floor"),
        BoundTerm::new("error_penalty_computed", -penalty, "eps·log|X|"),
        BoundTerm::new(
            "rate_computed",
            fano_at_floor + holevo - penalty - 1.0,
            "rate bound with computed terms",
        ),
    ];
    Ok(RateBound::assemble(eps, components, diagnostics))
}
