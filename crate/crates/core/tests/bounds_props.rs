use blindbounds::bounds::{mixedlb_rate, pinskerlb_chain, separation_pipeline};
use blindbounds::defect::{channel_joint, marginal_error};
use blindbounds::info::cond_mutual_info_cc_given_x;
use blindbounds::{Bits, ClassicalEnsemble};
use proptest::prelude::*;

mod common;
use common::{channel, near_identity, pair};

fn admissible_joint() -> impl Strategy<Value = (ClassicalEnsemble, blindbounds::StochasticMatrix)> {
    (2usize..=4).prop_flat_map(|d| (pair(d), prop_oneof![near_identity(d), channel(d, d)]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn chain_is_ordered((e, m) in admissible_joint()) {
        let eps = marginal_error(&e, &m).unwrap();
        prop_assume!(eps < 1.0);
        let t = channel_joint(&e, &m).unwrap();
        let r = pinskerlb_chain(&e, &t, eps).unwrap();
        let v = r.values();
        for w in v.windows(2) {
            prop_assert!(w[0] + 1e-10 >= w[1]);
        }
        prop_assert!((r.a.powi(2) - cond_mutual_info_cc_given_x(&t).0).abs() <= 1e-12);
        prop_assert!(r.defect_lower_bound() <= r.a.powi(2) + 1e-10);
    }

    #[test]
    fn rate_is_monotone(
        e in (2usize..=5).prop_flat_map(pair),
        d1 in 0.0f64..10.0, d2 in 0.0f64..10.0,
        e1 in 0.0f64..1.0, e2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        let (elo, ehi) = (e1.min(e2), e1.max(e2));
        let at = |defect: f64, eps: f64| mixedlb_rate(&e, Bits(defect), eps).unwrap().value;
        prop_assert!(at(lo, elo) <= at(hi, elo));
        prop_assert!(at(lo, ehi) <= at(lo, elo));
        let r = mixedlb_rate(&e, Bits(hi), ehi).unwrap();
        prop_assert!((r.value - r.recombined()).abs() <= 1e-12);
        prop_assert_eq!(r.vacuous, r.value < 0.0);
    }

    #[test]
    fn pipeline_algebra(d in 2usize..=1 << 16) {
        let r = separation_pipeline(d).unwrap();
        let target = (d as f64).log2() - 7.0;
        prop_assert!((r.value - target).abs() <= 1e-12);
        prop_assert!((r.recombined() - r.value).abs() <= 1e-12);
    }
}
