//! Seeded generators for test instances.
//!
//! Everything is driven by [`ChaCha8Rng`]; [`stream_rng`] gives each
//! parallel chunk its own stream so results do not depend on thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma};

use crate::dist::Distribution;
use crate::stochastic::StochasticMatrix;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Symmetric Dirichlet(`alpha`) draw on `d` symbols.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, d: usize, alpha: f64) -> Distribution {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let w: Vec<f64> = (0..d).map(|_| gamma.sample(rng)).collect();
        if w.iter().sum::<f64>() > 0.0 {
            return Distribution::from_vec_unchecked(w);
        }
    }
}

/// Uniform draw from the probability simplex.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Distribution {
    dirichlet(rng, d, 1.0)
}

/// Rows drawn independently from the simplex.
pub fn random_stochastic<R: Rng + ?Sized>(rng: &mut R, d: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|_| random_distribution(rng, cols).probs().to_vec())
        .collect()
}

pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, d: usize) -> StochasticMatrix {
    let entries = random_stochastic(rng, d, d).into_iter().flatten().collect();
    StochasticMatrix::from_entries_unchecked(d, entries)
}

pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..d).collect();
    p.shuffle(rng);
    p
}

/// Sinkhorn-balanced random positive matrix.
pub fn random_doubly_stochastic<R: Rng + ?Sized>(rng: &mut R, d: usize) -> StochasticMatrix {
    let mut a: Vec<f64> = (0..d * d).map(|_| rng.random::<f64>() + 1e-3).collect();
    for _ in 0..10_000 {
        for c in 0..d {
            let s: f64 = a[c * d..(c + 1) * d].iter().sum();
            a[c * d..(c + 1) * d].iter_mut().for_each(|v| *v /= s);
        }
        let mut worst = 0.0f64;
        for cp in 0..d {
            let s: f64 = (0..d).map(|c| a[c * d + cp]).sum();
            worst = worst.max((s - 1.0).abs());
            (0..d).for_each(|c| a[c * d + cp] /= s);
        }
        if worst < 1e-15 {
            break;
        }
    }
    StochasticMatrix::from_entries_unchecked(d, a)
}

/// Random convex combination of `k` random permutation matrices.
pub fn random_permutation_mixture<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> StochasticMatrix {
    let w = random_distribution(rng, k);
    let mut entries = vec![0.0; d * d];
    for &q in w.probs() {
        let perm = random_permutation(rng, d);
        for (c, &cp) in perm.iter().enumerate() {
            entries[c * d + cp] += q;
        }
    }
    StochasticMatrix::from_entries_unchecked(d, entries)
}
