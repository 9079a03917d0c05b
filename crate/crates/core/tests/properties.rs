//! Randomized invariant suites, 1000 cases each.

mod props;

use proptest::prelude::*;

use props::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn whitney_multiplicativity((a, b) in sheaf_pair()) {
        whitney(&a, &b)?;
    }

    #[test]
    fn chern_character_is_a_ring_map(a in sheaf(), b in surf()) {
        ch_ring_map(&a, &b)?;
    }

    #[test]
    fn dual_is_an_involution(a in sheaf()) {
        dual_involution(&a)?;
    }

    #[test]
    fn chi_is_additive_on_registered_sequences(s in 0usize..3, k in prop::collection::vec(key_spec(), 1..4)) {
        chi_additivity(s, &k)?;
    }

    #[test]
    fn serre_duality_is_an_involution(s in 0usize..3, k in key_spec()) {
        serre_duality(s, &k)?;
    }

    #[test]
    fn propagation_is_order_independent(s in 0usize..3, k in prop::collection::vec(key_spec(), 1..4), seed in any::<u64>()) {
        propagation_order(s, &k, seed)?;
    }

    #[test]
    fn reports_are_byte_deterministic(t in tiny_scene()) {
        report_determinism(&t)?;
    }
}
