//! Synthetic transaction arrivals.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::amount::TokenAmount;
use crate::fee_market::{TipConfig, Transaction};
use crate::rate::Rate;
use crate::sim::config::{Arrivals, TrafficProfile};

/// Stateful arrival process; `Uniform` arrivals carry the fractional
/// remainder of the expected count from block to block.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    carry: Rate,
    next_id: u64,
}

impl Default for TrafficGenerator {
    fn default() -> Self {
        Self::new()
    }
}

impl TrafficGenerator {
    pub fn new() -> Self {
        TrafficGenerator { carry: Rate::ZERO, next_id: 0 }
    }

    /// Transactions issued so far.
    pub fn issued(&self) -> u64 {
        self.next_id
    }

    /// Number of arrivals over `blocks` blocks of `block_seconds` at `tps`.
    pub fn arrivals<R: Rng + ?Sized>(&mut self, rng: &mut R, mode: Arrivals, tps: Rate, block_seconds: u64, blocks: u64) -> u64 {
        if tps.is_zero() || blocks == 0 {
            return 0;
        }
        let seconds = Rate::integer(block_seconds as u128 * blocks as u128);
        let expected = tps.checked_mul(seconds).expect("expected arrivals fit");
        match mode {
            Arrivals::Poisson => {
                let lambda = expected.to_f64();
                match Poisson::new(lambda) {
                    Ok(d) => d.sample(rng) as u64,
                    Err(_) => 0,
                }
            }
            Arrivals::Uniform => {
                let total = expected.checked_add(self.carry).expect("carry fits");
                let n = total.floor();
                self.carry = total.checked_sub(Rate::integer(n)).expect("fractional part");
                n as u64
            }
        }
    }

    /// One block's worth of transactions. Tips are drawn uniformly from
    /// `tips` when given (Poisson mode) or set to the midpoint (uniform
    /// mode); without `tips` every tip is zero.
    pub fn next_block<R: Rng + ?Sized>(
        &mut self,
        profile: &TrafficProfile,
        tips: Option<&TipConfig>,
        rng: &mut R,
        block_seconds: u64,
        height: u64,
        day: u64,
    ) -> Vec<Transaction> {
        let n = self.arrivals(rng, profile.arrivals, profile.tps_at(day), block_seconds, 1);
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let tip = match (tips, profile.arrivals) {
                (None, _) => TokenAmount::ZERO,
                (Some(t), Arrivals::Poisson) => draw_tip(t, rng),
                (Some(t), Arrivals::Uniform) => midpoint_tip(t),
            };
            out.push(Transaction { id: self.next_id, gas_used: profile.avg_gas_per_tx, tip, submitted_at: height });
            self.next_id += 1;
        }
        out
    }

    pub(crate) fn skip_ids(&mut self, n: u64) {
        self.next_id += n;
    }
}

pub fn draw_tip<R: Rng + ?Sized>(tips: &TipConfig, rng: &mut R) -> TokenAmount {
    TokenAmount::from_atoms(rng.random_range(tips.min_tip.atoms()..=tips.max_tip.atoms()))
}

pub fn midpoint_tip(tips: &TipConfig) -> TokenAmount {
    let (a, b) = (tips.min_tip.atoms(), tips.max_tip.atoms());
    TokenAmount::from_atoms(a + (b - a) / 2)
}

/// A single block of traffic from a fresh generator.
pub fn generate_traffic<R: Rng + ?Sized>(
    profile: &TrafficProfile,
    tips: Option<&TipConfig>,
    rng: &mut R,
    block_seconds: u64,
) -> Vec<Transaction> {
    TrafficGenerator::new().next_block(profile, tips, rng, block_seconds, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(tps: u128) -> TrafficProfile {
        TrafficProfile { mean_tps: Rate::integer(tps), ..TrafficProfile::quiet() }
    }

    #[test]
    fn zero_tps_is_always_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(generate_traffic(&profile(0), None, &mut rng, 2).is_empty());
        }
    }

    #[test]
    fn tips_zero_when_inactive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let txs = generate_traffic(&profile(50), None, &mut rng, 2);
        assert!(!txs.is_empty());
        assert!(txs.iter().all(|t| t.tip.is_zero()));
    }

    #[test]
    fn tips_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = TipConfig::default();
        let txs = generate_traffic(&profile(200), Some(&cfg), &mut rng, 2);
        assert!(txs.iter().all(|t| t.tip >= cfg.min_tip && t.tip <= cfg.max_tip));
    }

    #[test]
    fn uniform_carries_fraction() {
        let mut g = TrafficGenerator::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tps = Rate::new(1, 3).unwrap();
        let counts: Vec<u64> = (0..6).map(|_| g.arrivals(&mut rng, Arrivals::Uniform, tps, 2, 1)).collect();
        assert_eq!(counts, vec![0, 1, 1, 0, 1, 1]);
    }
}
