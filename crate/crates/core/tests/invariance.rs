mod common;

use common::suites::{invariance_case, invariance_suite, InvarianceSummary};
use proptest::prelude::*;

#[test]
fn fixed_battery() {
    let s = invariance_suite(0..64).unwrap();
    assert!(s.max_permutation_gap <= 1e-10, "{s:?}");
    assert!(s.max_sum_error <= 1e-9, "{s:?}");
    assert!(s.max_padding_gap <= 1e-12, "{s:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn permutation_sums_and_padding(seed in any::<u64>()) {
        let mut s = InvarianceSummary::default();
        invariance_case(seed, &mut s).unwrap();
        prop_assert!(s.max_permutation_gap <= 1e-10, "{:?}", s);
        prop_assert!(s.max_sum_error <= 1e-9, "{:?}", s);
        prop_assert!(s.max_padding_gap <= 1e-12, "{:?}", s);
    }
}
