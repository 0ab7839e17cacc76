//! Randomized checks shared by the property suites and the acceptance run.
//! Each `check_*` returns a description of the first violation.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stakesim_core::escrow::{EscrowAccount, EscrowError, WithdrawalFeeTable};
use stakesim_core::ledger::{distribute_loyalty_pool, loyalty_factor, Masternode, NodeId, Role};
use stakesim_core::rewards::{FeeDisposition, RewardScheme};
use stakesim_core::sim::config::{parse_text, Arrivals, FeeSharePolicy, NodeGroup, TipPolicy};
use stakesim_core::sim::SimState;
use stakesim_core::treasury::{Project, Shares, TreasuryError, TreasuryState};
use stakesim_core::{Rate, ScenarioConfig, TokenAmount};

pub const YEAR: u64 = 15_768_000;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn big(x: u128) -> BigInt {
    BigInt::from(x)
}

fn floor(r: &BigRational) -> BigInt {
    r.floor().to_integer()
}

fn ratio(a: BigInt, b: BigInt) -> BigRational {
    BigRational::new(a, b)
}

#[derive(Debug, Clone)]
pub enum EscrowOp {
    Accrue(u128),
    Withdraw(u128),
    Wait(u64),
}

pub fn escrow_ops() -> impl Strategy<Value = Vec<EscrowOp>> {
    let op = prop_oneof![
        (1u128..3_000_000u128).prop_map(|t| EscrowOp::Accrue(t * 10u128.pow(15))),
        (0u128..3_000_000u128).prop_map(|t| EscrowOp::Withdraw(t * 10u128.pow(15))),
        (0u64..YEAR / 4).prop_map(EscrowOp::Wait),
    ];
    prop::collection::vec(op, 1..40)
}

pub fn check_escrow(ops: &[EscrowOp]) -> Result<(), String> {
    let table = WithdrawalFeeTable::xdc_default(YEAR);
    let mut acct = EscrowAccount::new(NodeId(1));
    let mut now = 0;
    for op in ops {
        match *op {
            EscrowOp::Accrue(a) => acct.accrue(TokenAmount::from_atoms(a), now).map_err(|e| e.to_string())?,
            EscrowOp::Withdraw(a) => {
                let before = acct.balance();
                match acct.withdraw(TokenAmount::from_atoms(a), now, &table) {
                    Ok(w) => {
                        ensure!(w.payout.atoms() + w.burned.atoms() == a, "payout + burn != {a}");
                        ensure!(acct.balance().atoms() == before.atoms() - a, "balance not debited");
                    }
                    Err(EscrowError::BelowThreshold { .. } | EscrowError::InsufficientBalance { .. }) => {
                        ensure!(acct.balance() == before, "refused withdrawal changed the balance");
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
            EscrowOp::Wait(dt) => now += dt,
        }
        let deposits: TokenAmount = acct.deposits().map(|d| d.amount).sum();
        ensure!(deposits == acct.balance(), "deposits {deposits} vs balance {}", acct.balance());
        let out = acct.balance().atoms() + acct.total_paid().atoms() + acct.total_burned().atoms();
        ensure!(out == acct.total_accrued().atoms(), "balance + paid + burned != accrued");
    }
    Ok(())
}

/// (kind, holder, amount in atoms, percent)
pub type TreasuryOp = (u8, u32, u128, u128);

pub fn treasury_ops() -> impl Strategy<Value = Vec<TreasuryOp>> {
    prop::collection::vec((0u8..4, 1u32..6, 1u128..10u128.pow(24), 0u128..60), 1..40)
}

pub fn check_treasury(ops: &[TreasuryOp]) -> Result<(), String> {
    let projects = vec![
        Project { id: "a".into(), performance_score: Rate::integer(3), fee_return_rate: Rate::ZERO },
        Project { id: "b".into(), performance_score: Rate::integer(1), fee_return_rate: Rate::ZERO },
    ];
    let mut t = TreasuryState::new();
    for &(kind, holder, amount, pct) in ops {
        let amount = TokenAmount::from_atoms(amount);
        let r = match kind {
            0 => t.invest(NodeId(holder), amount, Rate::percent(pct)).map(|_| ()),
            1 => t.distribute_to_projects(&projects, t.fund().mul_rate(Rate::percent(pct.min(100))).unwrap()).map(|_| ()),
            2 => t.collect_project_fees(if pct % 2 == 0 { "a" } else { "b" }, amount),
            _ => {
                let held = t.shares_of(NodeId(holder));
                t.redeem(NodeId(holder), Shares(held.0 * pct.min(100) / 100)).map(|_| ())
            }
        };
        match r {
            Ok(()) | Err(TreasuryError::UnknownProject(_) | TreasuryError::ZeroSharePrice) => {}
            Err(e) => return Err(e.to_string()),
        }
        let inflow = t.total_invested().atoms() + t.total_collected().atoms();
        let outflow = t.total_allocated().atoms() + t.total_redeemed().atoms();
        ensure!(t.fund().atoms() + outflow == inflow, "fund + outflow != inflow");
        let held: u128 = t.holders().map(|(_, s)| s.0).sum();
        ensure!(Shares(held) == t.total_shares(), "holder shares {held} vs total {:?}", t.total_shares());
    }
    Ok(())
}

fn node(id: u32, years: u32) -> Masternode {
    Masternode {
        id: NodeId(id),
        role: if id.is_multiple_of(2) { Role::Validator } else { Role::Standby },
        stake: TokenAmount::from_tokens(10_000_000),
        lock_years: years,
        joined_at: 0,
        availability: 1.0,
    }
}

pub fn loyalty_cases() -> impl Strategy<Value = (Vec<u32>, u128)> {
    (prop::collection::vec(1u32..=15, 1..=10), 0u128..=10u128.pow(30))
}

pub fn check_loyalty(years: &[u32], pool: u128) -> Result<(), String> {
    let nodes: Vec<Masternode> = years.iter().enumerate().map(|(i, &y)| node(i as u32 + 1, y)).collect();
    let payout = distribute_loyalty_pool(TokenAmount::from_atoms(pool), &nodes).map_err(|e| e.to_string())?;
    let weights: Vec<u128> = years.iter().map(|&y| y.min(10) as u128).collect();
    let sum: u128 = weights.iter().sum();
    let mut paid = big(0);
    for ((id, got), w) in payout.allocations.iter().zip(&weights) {
        let exact = ratio(big(pool) * big(*w), big(sum));
        ensure!(big(got.atoms()) == floor(&exact), "node {id}: {got} vs {exact}");
        let f = loyalty_factor(nodes[id.0 as usize - 1].lock_years).map_err(|e| e.to_string())?;
        ensure!(f as u128 == *w, "loyalty factor {f} vs {w}");
        paid += big(got.atoms());
    }
    ensure!(paid + big(payout.dust.atoms()) == big(pool), "payout + dust != pool");
    ensure!(payout.dust.atoms() < nodes.len() as u128, "dust {} too large", payout.dust);
    Ok(())
}

/// (holder, amount in atoms, entry fee percent) investments, then a fee bonus.
pub fn pricing_cases() -> impl Strategy<Value = (Vec<(u32, u128, u128)>, u128)> {
    (prop::collection::vec((1u32..=10, 1u128..=10u128.pow(26), 0u128..=50), 1..=30), 0u128..=10u128.pow(25))
}

pub fn check_pricing(ops: &[(u32, u128, u128)], bonus: u128) -> Result<(), String> {
    let mut t = TreasuryState::new();
    let mut fund = BigRational::from_integer(big(0));
    let mut shares = big(0);
    let mut held = BTreeMap::<u32, BigInt>::new();
    for &(holder, amount, fee_pct) in ops {
        let minted = t.invest(NodeId(holder), TokenAmount::from_atoms(amount), Rate::percent(fee_pct)).map_err(|e| e.to_string())?;
        let net = big(amount) - floor(&ratio(big(amount) * big(fee_pct), big(100)));
        let expect = if shares == big(0) {
            net
        } else {
            floor(&(BigRational::from_integer(net) * BigRational::from_integer(shares.clone()) / fund.clone()))
        };
        ensure!(big(minted.0) == expect, "minted {} vs {expect}", minted.0);
        fund += BigRational::from_integer(big(amount));
        shares += expect.clone();
        *held.entry(holder).or_insert_with(|| big(0)) += expect;
    }
    if bonus > 0 {
        // external fees raise the price without minting
        let p = Project { id: "p".into(), performance_score: Rate::ONE, fee_return_rate: Rate::ZERO };
        t.distribute_to_projects(&[p], TokenAmount::ZERO).map_err(|e| e.to_string())?;
        t.collect_project_fees("p", TokenAmount::from_atoms(bonus)).map_err(|e| e.to_string())?;
        fund += BigRational::from_integer(big(bonus));
    }
    let price = t.share_price().ok_or("no share price")?;
    ensure!(
        ratio(big(price.numer()), big(price.denom())) == fund.clone() / BigRational::from_integer(shares.clone()),
        "share price {price} is not fund / shares"
    );
    for (holder, s) in held {
        let s_u: u128 = s.clone().try_into().map_err(|_| "share count overflow")?;
        let out = t.redeem(NodeId(holder), Shares(s_u)).map_err(|e| e.to_string())?;
        let expect = floor(&(BigRational::from_integer(s.clone()) * fund.clone() / BigRational::from_integer(shares.clone())));
        ensure!(big(out.atoms()) == expect, "holder {holder} redeemed {out} vs {expect}");
        fund -= BigRational::from_integer(expect);
        shares -= s;
    }
    ensure!(t.total_shares() == Shares(0), "shares left after full redemption");
    Ok(())
}

pub fn audit_base() -> ScenarioConfig {
    let text = "seed = 1\n[network]\ntotal_supply = \"10000000000\"\n[escrow]\nthreshold = \"1000\"\nwithdraw_at = \"1000\"\n[[treasury.projects]]\nid = \"x\"\nscore = 2\nreturn_rate = \"90%\"\n[[treasury.projects]]\nid = \"y\"\nscore = 1\n";
    ScenarioConfig::from_value(&parse_text(text, false).unwrap()).unwrap()
}

/// A short scenario with every feature toggled at random.
pub fn random_config(rng: &mut ChaCha8Rng, base: &ScenarioConfig) -> ScenarioConfig {
    let mut c = base.clone();
    c.seed = rng.random();
    c.scheme = match rng.random_range(0..4) {
        0 => RewardScheme::current_model(),
        1 => RewardScheme::scheme1(),
        2 => RewardScheme::scheme2(),
        _ => RewardScheme::eth_style(Rate::percent(rng.random_range(1..20))),
    };
    if rng.random_bool(0.2) {
        c.scheme.fee_disposition = FeeDisposition::Burn;
    }
    c.network.validator_rate = c.scheme.validator_rate;
    c.network.standby_rate = c.scheme.standby_rate;
    c.fee_share = if rng.random_bool(0.5) { FeeSharePolicy::Producer } else { FeeSharePolicy::Pooled };
    let stake = |rng: &mut ChaCha8Rng| TokenAmount::from_tokens(rng.random_range(10_000_000..40_000_000));
    let mut nodes = Vec::new();
    for _ in 0..rng.random_range(1..5) {
        nodes.push(NodeGroup {
            role: Role::Validator,
            count: rng.random_range(1..3),
            stake: stake(rng),
            lock_years: rng.random_range(1..12),
            availability: [1.0, 0.9, 0.5, 0.0][rng.random_range(0..4)],
        });
    }
    for _ in 0..rng.random_range(0..3) {
        nodes.push(NodeGroup {
            role: Role::Standby,
            count: 1,
            stake: stake(rng),
            lock_years: rng.random_range(1..12),
            availability: [1.0, 0.7][rng.random_range(0..2)],
        });
    }
    c.nodes = nodes;
    c.simulation.duration_blocks = rng.random_range(1..40);
    c.simulation.epoch_seconds = 2 * rng.random_range(1..12);
    c.traffic.mean_tps = Rate::new(rng.random_range(0..4000), 10).unwrap();
    c.traffic.arrivals = if rng.random_bool(0.5) { Arrivals::Poisson } else { Arrivals::Uniform };
    c.traffic.mempool_cap = rng.random_range(0..3000);
    c.traffic.avg_gas_per_tx = rng.random_range(21_000..3_000_000);
    c.fee_market.tips = [TipPolicy::Tiered, TipPolicy::Always, TipPolicy::Never][rng.random_range(0..3)];
    c.fee_market.dynamic_base_fee = rng.random_bool(0.8);
    c.fee_market.min_base_fee = TokenAmount::ONE_ATOM;
    c.fee_market.multiplier_override = rng.random_bool(0.3).then(|| rng.random_range(1..=100));
    c.loyalty.enabled = rng.random_bool(0.25);
    c.escrow.enabled = rng.random_bool(0.4);
    c.escrow.zero_fee_age_days = 1;
    c.treasury.enabled = rng.random_bool(0.4);
    c.treasury.invest_fraction = Rate::percent(rng.random_range(0..=100));
    c.treasury.budget_rate = Rate::percent(rng.random_range(0..=30));
    c.treasury.redeem_at_end = rng.random_bool(0.5);
    c.faults.inactivity_penalty_rate = Rate::new(rng.random_range(0..1000), 1_000_000).unwrap();
    c.faults.slash_probability = [0.0, 0.05, 0.5][rng.random_range(0..3)];
    c.faults.slash_fraction = Rate::percent(rng.random_range(0..=100));
    c
}

/// Runs `cases` random scenarios, auditing supply after every block.
/// Returns the number of blocks simulated.
pub fn check_supply_audit(seed: u64, cases: usize) -> Result<u64, String> {
    let base = audit_base();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = 0u64;
    for case in 0..cases {
        let cfg = random_config(&mut rng, &base);
        let mut s = SimState::new(&cfg).map_err(|e| format!("case {case}: {e}"))?;
        while !s.is_finished() {
            s.step().map_err(|e| format!("case {case}: {e}"))?;
            s.audit().map_err(|e| format!("case {case}: {e}"))?;
            blocks += 1;
        }
        let (lhs, rhs) = s.earnings_identity().map_err(|e| e.to_string())?;
        ensure!(lhs == rhs, "case {case}: earnings identity {lhs} vs {rhs}");
    }
    Ok(blocks)
}
