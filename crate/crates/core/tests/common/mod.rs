#![allow(dead_code)]

use blindbounds::{ClassicalEnsemble, Distribution, StochasticMatrix};
use proptest::prelude::*;

/// Weights in `[0, 1)` with one entry lifted so the total is positive;
/// about a fifth of the entries are exact zeros.
pub fn simplex(d: usize) -> impl Strategy<Value = Distribution> {
    (
        prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], d),
        0..d,
    )
        .prop_map(|(mut w, k)| {
            w[k] += 0.5;
            Distribution::from_weights(&w).unwrap()
        })
}

pub fn full_support(d: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, d).prop_map(|w| Distribution::from_weights(&w).unwrap())
}

pub fn channel(d: usize, cols: usize) -> impl Strategy<Value = StochasticMatrix> {
    prop::collection::vec(simplex(cols), d)
        .prop_map(|rows| StochasticMatrix::from_rows(rows.into_iter().map(|r| r.probs().to_vec()).collect()).unwrap())
}

/// Channel `(1-t)I + tR` with `t` spread over many orders of magnitude.
pub fn near_identity(d: usize) -> impl Strategy<Value = StochasticMatrix> {
    (channel(d, d), -9.0f64..0.0)
        .prop_map(move |(r, k)| StochasticMatrix::mix(&StochasticMatrix::identity(d), &r, 10f64.powf(k)).unwrap())
}

pub fn pair(d: usize) -> impl Strategy<Value = ClassicalEnsemble> {
    (full_support(d), full_support(d)).prop_map(|(a, b)| ClassicalEnsemble::equiprobable(vec![a, b]).unwrap())
}
