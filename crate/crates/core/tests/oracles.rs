//! Randomized comparisons against exhaustive oracles: LP optima against
//! vertex enumeration, household PV sizing against a grid search.

mod common;

use common::*;
use prosumage::dispatch::{build_dispatch_lp, solve_dispatch, HouseholdExchange};
use prosumage::lp::{solve_lp, DEFAULT_TOLERANCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut infeasible = 0;
    for k in 0..60 {
        let lp = random_lp(&mut rng);
        if vertex_oracle(&lp).is_none() {
            infeasible += 1;
        }
        assert_matches_oracle(&lp, &format!("lp {k}"));
    }
    // the family should exercise both outcomes
    assert!(infeasible > 0 && infeasible < 60, "{infeasible}");
}

#[test]
fn random_dispatch_toys_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in 0..40 {
        let hours = rng.gen_range(1..=8);
        let techs = rng.gen_range(1..=3);
        let p = random_system(&mut rng, hours, techs, false);
        let d = build_dispatch_lp(&p, &HouseholdExchange::zeros(hours)).unwrap();
        assert_matches_oracle(&d.lp, &format!("dispatch {k}"));
        let sol = solve_dispatch(&p, &HouseholdExchange::zeros(hours)).unwrap();
        let z = solve_lp(&d.lp, DEFAULT_TOLERANCE).objective;
        assert!((sol.z_sys - z).abs() <= 1e-6 * (1.0 + z.abs()), "dispatch {k}");
    }
}

#[test]
fn random_storage_toys_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..20 {
        let p = random_system(&mut rng, 2, 1, true);
        let d = build_dispatch_lp(&p, &HouseholdExchange::zeros(2)).unwrap();
        assert_matches_oracle(&d.lp, &format!("storage {k}"));
    }
}

#[test]
fn two_hour_households_match_grid_search() {
    assert_eq!(household_grid_sweep(14, 25), Ok(25));
}
