//! Entropies, divergences and distances for classical (diagonal) states.
//!
//! All logarithms are base 2. `0 · log 0` is taken to be 0; relative
//! entropy against a vector with smaller support is an error, not `+∞`.

use std::fmt;

use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::dist::{
    compensated_sum, split_marginals, ClassicalEnsemble, Distribution, ExactDistribution, JointDistribution,
};
use crate::error::{Error, Result};

/// An information quantity measured in bits.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bits(pub f64);

impl Bits {
    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

fn same_dim(p: usize, q: usize) -> Result<()> {
    if p != q {
        return Err(Error::DimensionMismatch { expected: p, found: q });
    }
    Ok(())
}

/// `-Σ p log p` over a raw (possibly sub-normalized) vector.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let h = -compensated_sum(probs.iter().filter(|p| **p > 0.0).map(|p| p * p.log2()));
    h.max(0.0)
}

pub fn entropy(p: &Distribution) -> Bits {
    Bits(shannon_entropy(p.probs()))
}

/// Binary entropy `H(λ)`.
pub fn binary_entropy(lambda: f64) -> f64 {
    shannon_entropy(&[lambda, 1.0 - lambda])
}

/// `½ Σ |p_c - q_c|`.
pub fn trace_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    same_dim(p.d(), q.d())?;
    Ok(l1_distance(p.probs(), q.probs()) / 2.0)
}

/// `Σ |a_c - b_c|` on raw slices.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| (x - y).abs()))
}

pub fn trace_distance_exact(p: &ExactDistribution, q: &ExactDistribution) -> Result<BigRational> {
    same_dim(p.d(), q.d())?;
    let total: BigRational = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / BigRational::from_integer(2.into()))
}

/// Classical fidelity, the Bhattacharyya coefficient `Σ √(p_c q_c)`.
pub fn fidelity(p: &Distribution, q: &Distribution) -> Result<f64> {
    same_dim(p.d(), q.d())?;
    let f = compensated_sum(p.probs().iter().zip(q.probs()).map(|(a, b)| (a * b).sqrt()));
    Ok(f.clamp(0.0, 1.0))
}

/// Relative entropy `D(p‖q)` on raw slices.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    same_dim(p.len(), q.len())?;
    let mut terms = Vec::with_capacity(p.len());
    for (index, (a, b)) in p.iter().zip(q).enumerate() {
        if *a > 0.0 {
            if *b <= 0.0 {
                return Err(Error::DivergenceUndefined { index });
            }
            terms.push(a * (a / b).log2());
        }
    }
    Ok(compensated_sum(terms).max(0.0))
}

pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<Bits> {
    relative_entropy(p.probs(), q.probs()).map(Bits)
}

/// `S(Σ_x p_x ρ^x) - Σ_x p_x S(ρ^x)`, equal to `I(X:C)`.
pub fn holevo_information(e: &ClassicalEnsemble) -> Bits {
    let average = entropy(&e.average()).0;
    Bits((average - conditional_entropy_c_given_x(e).0).max(0.0))
}

/// `S(C|X) = Σ_x p_x S(ρ^x)`.
pub fn conditional_entropy_c_given_x(e: &ClassicalEnsemble) -> Bits {
    Bits(compensated_sum(
        e.priors()
            .probs()
            .iter()
            .zip(e.conditionals())
            .map(|(px, rho)| px * entropy(rho).0),
    ))
}

/// `I(C:C′|X) = Σ_x p(x) D(τ^x_{CC′} ‖ τ^x_C ⊗ τ^x_{C′})`.
pub fn cond_mutual_info_cc_given_x(t: &JointDistribution) -> Bits {
    let (nx, nc, ncp) = t.shape();
    let px = t.label_marginal();
    let mut terms = Vec::with_capacity(nx);
    for (x, &mass) in px.iter().enumerate() {
        if mass <= 0.0 {
            continue;
        }
        let cc = t.conditional_cc(x).expect("positive label mass");
        terms.push(mass * pair_mutual_information(&cc, nc, ncp));
    }
    Bits(compensated_sum(terms).max(0.0))
}

/// Entropy-expansion form `H(XC) + H(XC′) - H(XCC′) - H(X)`, kept as an
/// independent route for cross-checking [`cond_mutual_info_cc_given_x`].
pub fn cond_mutual_info_by_entropies(t: &JointDistribution) -> f64 {
    let (nx, nc, ncp) = t.shape();
    let mut xc = vec![0.0; nx * nc];
    let mut xcp = vec![0.0; nx * ncp];
    for x in 0..nx {
        for c in 0..nc {
            for cp in 0..ncp {
                let v = t.at(x, c, cp);
                xc[x * nc + c] += v;
                xcp[x * ncp + cp] += v;
            }
        }
    }
    shannon_entropy(&xc) + shannon_entropy(&xcp) - shannon_entropy(t.table()) - shannon_entropy(&t.label_marginal())
}

/// `I(A:B)` of a normalized row-major `na × nb` table.
pub fn pair_mutual_information(table: &[f64], na: usize, nb: usize) -> f64 {
    let (pa, pb) = split_marginals(table, na, nb);
    let mut terms = Vec::new();
    for a in 0..na {
        for b in 0..nb {
            let v = table[a * nb + b];
            if v > 0.0 {
                terms.push(v * (v / (pa[a] * pb[b])).log2());
            }
        }
    }
    compensated_sum(terms).max(0.0)
}

/// `S(A|B) = H(AB) - H(B)` of a row-major `na × nb` table.
pub fn pair_conditional_entropy(table: &[f64], na: usize, nb: usize) -> f64 {
    let (_, pb) = split_marginals(table, na, nb);
    (shannon_entropy(table) - shannon_entropy(&pb)).max(0.0)
}

/// Trace distance between two raw vectors of equal length.
pub(crate) fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    l1_distance(a, b) / 2.0
}

/// `true` iff every entry of `q` is zero where `p` is positive.
pub fn support_contained(p: &[f64], q: &[f64]) -> bool {
    p.iter().zip(q).all(|(a, b)| *a <= 0.0 || *b > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_bigint::BigInt;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&Distribution::uniform(4).unwrap()).0, 2.0, epsilon = 1e-15);
        assert_eq!(entropy(&Distribution::point_mass(5, 2).unwrap()).0, 0.0);
        // log 3 - 2/3
        let expected = 3f64.log2() - 2.0 / 3.0;
        assert_abs_diff_eq!(
            entropy(&Distribution::staircase(2).unwrap()).0,
            expected,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(expected, 0.918296, epsilon = 1e-6);
    }

    #[test]
    fn trace_distance_examples() {
        let p = ExactDistribution::uniform(2).unwrap();
        let r = ExactDistribution::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        assert_eq!(trace_distance_exact(&p, &r).unwrap(), q(1, 6));
        assert_eq!(trace_distance_exact(&p.product(&p), &r.product(&r)).unwrap(), q(7, 36));
        assert!(trace_distance_exact(&p, &p).unwrap().is_zero());
        let a = Distribution::uniform(3).unwrap();
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            trace_distance(&a, &Distribution::uniform(2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fidelity_examples() {
        let p = dist(&[0.5, 0.5]);
        let r = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        assert_abs_diff_eq!(fidelity(&p, &p).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(fidelity(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 0.0);
        let expected = (1.0f64 / 6.0).sqrt() + (1.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(fidelity(&p, &r).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.98560, epsilon = 1e-5);
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.5, 0.5]);
        let r = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(kl_divergence(&p, &p).unwrap().0, 0.0);
        let expected = 0.5 * 1.5f64.log2() + 0.5 * 0.75f64.log2();
        assert_abs_diff_eq!(kl_divergence(&p, &r).unwrap().0, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.084963, epsilon = 1e-6);
        let delta = Distribution::point_mass(8, 0).unwrap();
        assert_abs_diff_eq!(
            kl_divergence(&delta, &Distribution::uniform(8).unwrap()).unwrap().0,
            3.0,
            epsilon = 1e-15
        );
        assert_eq!(
            kl_divergence(&Distribution::uniform(2).unwrap(), &delta_2()).unwrap_err(),
            Error::DivergenceUndefined { index: 1 }
        );
    }

    fn delta_2() -> Distribution {
        Distribution::point_mass(2, 0).unwrap()
    }

    #[test]
    fn holevo_examples() {
        let same = ClassicalEnsemble::equiprobable(vec![dist(&[0.2, 0.8]); 3]).unwrap();
        assert_abs_diff_eq!(holevo_information(&same).0, 0.0, epsilon = 1e-15);
        let orth = ClassicalEnsemble::equiprobable(vec![dist(&[1.0, 0.0]), dist(&[0.0, 1.0])]).unwrap();
        assert_abs_diff_eq!(holevo_information(&orth).0, 1.0, epsilon = 1e-15);

        // Direct evaluation for d = 16: H(average) - ½ (4 + H(staircase(16))).
        let e = ClassicalEnsemble::uniform_staircase(16).unwrap();
        let eta = 136.0;
        let avg: Vec<f64> = (1..=16).map(|c| 0.5 / 16.0 + 0.5 * (17 - c) as f64 / eta).collect();
        let stair: Vec<f64> = (1..=16).map(|c| (17 - c) as f64 / eta).collect();
        let h = |v: &[f64]| -v.iter().map(|p| p * p.log2()).sum::<f64>();
        let expected = h(&avg) - 0.5 * (4.0 + h(&stair));
        assert_abs_diff_eq!(holevo_information(&e).0, expected, epsilon = 1e-12);
        assert!(holevo_information(&e).0 <= 1.0);
    }

    #[test]
    fn conditional_entropy_examples() {
        let e = ClassicalEnsemble::uniform_staircase(4).unwrap();
        let h4 = -[0.4f64, 0.3, 0.2, 0.1].iter().map(|p| p * p.log2()).sum::<f64>();
        assert_abs_diff_eq!(conditional_entropy_c_given_x(&e).0, 1.0 + 0.5 * h4, epsilon = 1e-14);
        assert_abs_diff_eq!(1.0 + 0.5 * h4, 1.92322, epsilon = 1e-5);
        let det = ClassicalEnsemble::equiprobable(vec![dist(&[1.0, 0.0]), dist(&[0.0, 1.0])]).unwrap();
        assert_eq!(conditional_entropy_c_given_x(&det).0, 0.0);
        for d in 2..=64 {
            let e = ClassicalEnsemble::uniform_staircase(d).unwrap();
            assert!(conditional_entropy_c_given_x(&e).0 >= (d as f64).log2() - 1.0);
        }
    }

    #[test]
    fn cond_mutual_info_examples() {
        // C′ independent of C under each label.
        let a = [0.3, 0.7];
        let b = [0.6, 0.4];
        let mut table = Vec::new();
        for x in 0..2 {
            for c in 0..2 {
                for bc in b {
                    table.push(0.5 * a[(c + x) % 2] * bc);
                }
            }
        }
        let t = JointDistribution::new(2, 2, 2, table).unwrap();
        assert_abs_diff_eq!(cond_mutual_info_cc_given_x(&t).0, 0.0, epsilon = 1e-15);

        // Perfect clone of point masses.
        let mut table = vec![0.0; 8];
        table[0] = 0.5; // x=0, c=0, c′=0
        table[4 + 3] = 0.5; // x=1, c=1, c′=1
        let t = JointDistribution::new(2, 2, 2, table).unwrap();
        assert_eq!(cond_mutual_info_cc_given_x(&t).0, 0.0);

        // Perfect copy of a uniform bit.
        let t = JointDistribution::new(1, 2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(cond_mutual_info_cc_given_x(&t).0, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cond_mutual_info_by_entropies(&t), 1.0, epsilon = 1e-15);
    }
}
