//! Monte Carlo checks of the random components against their analytic
//! moments, with fixed seeds and 3σ bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stakesim_core::ledger::{scheduled_producer, select_producer, LedgerState, Role, SelectionPolicy};
use stakesim_core::sim::config::TrafficProfile;
use stakesim_core::sim::traffic::TrafficGenerator;
use stakesim_core::{Rate, TokenAmount};

#[test]
fn stake_lottery_is_proportional_to_stake() {
    let mut ledger = LedgerState::default();
    let small = ledger.register_node(TokenAmount::from_tokens(10_000_000), Role::Validator, 1).unwrap();
    let big = ledger.register_node(TokenAmount::from_tokens(30_000_000), Role::Validator, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 100_000u64;
    let mut hits = 0u64;
    for h in 0..n {
        let id = scheduled_producer(&ledger, h, SelectionPolicy::StakeLottery, &mut rng).unwrap();
        assert!(id == small || id == big);
        hits += u64::from(id == big);
    }
    let p = 0.75;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let dev = (hits as f64 - n as f64 * p).abs();
    assert!(dev <= 3.0 * sigma, "{hits} draws for the 30M node, {dev:.1} from mean, 3σ = {:.1}", 3.0 * sigma);
}

#[test]
fn round_robin_skips_offline_validators() {
    let mut ledger = LedgerState::default();
    let t = TokenAmount::from_tokens(10_000_000);
    ledger.register_with(t, Role::Validator, 1, 0.0, 0).unwrap();
    let b = ledger.register_with(t, Role::Validator, 1, 1.0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for h in 0..50 {
        assert_eq!(select_producer(&ledger, h, SelectionPolicy::RoundRobin, &mut rng).unwrap(), b);
    }
}

#[test]
fn poisson_arrivals_match_moments() {
    let profile = TrafficProfile { mean_tps: Rate::integer(10), ..TrafficProfile::quiet() };
    let mut gen = TrafficGenerator::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let blocks = 10_000;
    let counts: Vec<f64> = (0..blocks)
        .map(|h| gen.next_block(&profile, None, &mut rng, 2, h, 0).len() as f64)
        .collect();
    let n = blocks as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let lambda = 20.0;
    let mean_sigma = (lambda / n).sqrt();
    assert!((mean - lambda).abs() <= 3.0 * mean_sigma, "mean {mean}");
    // sampling sd of the variance estimate for a Poisson population
    let var_sigma = ((2.0 * lambda * lambda + lambda) / n).sqrt();
    assert!((var - lambda).abs() <= 3.0 * var_sigma, "variance {var}");
}
