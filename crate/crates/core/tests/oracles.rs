//! Integer payouts against exact rational arithmetic.

mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn loyalty_matches_rational_oracle((years, pool) in common::loyalty_cases()) {
        common::check_loyalty(&years, pool).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn treasury_pricing_matches_rational_oracle((ops, bonus) in common::pricing_cases()) {
        common::check_pricing(&ops, bonus).map_err(TestCaseError::fail)?;
    }
}
