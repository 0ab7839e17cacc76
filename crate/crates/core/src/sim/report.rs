//! Run results: per-epoch rows, per-node totals and the headline summary.
//!
//! Every amount serializes as a decimal string and every ratio as an exact
//! or fixed-decimal string, so two runs of the same scenario serialize to
//! identical bytes.

use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::amount::{SignedTokenAmount, TokenAmount};
use crate::ledger::{NodeId, Role};
use crate::math::MathError;
use crate::rate::Rate;

/// Rational with a sign, for net growth rates that may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedRate {
    pub negative: bool,
    pub magnitude: Rate,
}

impl SignedRate {
    pub fn to_percent_string(&self, decimals: u32) -> String {
        let s = self.magnitude.to_percent_string(decimals);
        let all_zero = s.chars().all(|c| matches!(c, '0' | '.' | '%'));
        if self.negative && !all_zero {
            format!("-{s}")
        } else {
            s
        }
    }

    pub fn to_f64(&self) -> f64 {
        let m = self.magnitude.to_f64();
        if self.negative {
            -m
        } else {
            m
        }
    }
}

impl fmt::Display for SignedRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative && !self.magnitude.is_zero() {
            write!(f, "-{}", self.magnitude)
        } else {
            write!(f, "{}", self.magnitude)
        }
    }
}

impl Serialize for SignedRate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// One settled epoch. Flow columns cover that epoch only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub end_height: u64,
    pub supply: TokenAmount,
    pub minted: TokenAmount,
    pub burned: TokenAmount,
    pub fee_burned: TokenAmount,
    pub penalty_burned: TokenAmount,
    pub escrow_burned: TokenAmount,
    pub fees_charged: TokenAmount,
    pub tips: TokenAmount,
    pub base_fee: TokenAmount,
    /// Scheduled TPS at the epoch's last block.
    pub tps: String,
    pub fee_multiplier: u64,
    pub tx_included: u64,
    pub tx_dropped: u64,
    pub mempool: u64,
    pub blocks_produced: u64,
    pub blocks_by_standby: u64,
    pub blocks_skipped: u64,
    pub treasury_fund: TokenAmount,
    pub escrow_balance: TokenAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub id: NodeId,
    pub role: Role,
    pub lock_years: u32,
    pub initial_stake: TokenAmount,
    pub final_stake: TokenAmount,
    pub staking_reward: TokenAmount,
    pub fee_income: TokenAmount,
    pub tips: TokenAmount,
    /// staking_reward + fee_income + tips.
    pub gross_earnings: TokenAmount,
    pub penalties: TokenAmount,
    pub stake_slashed: TokenAmount,
    pub net_earnings: TokenAmount,
    pub blocks_produced: u64,
    pub slots_missed: u64,
    pub escrow_balance: TokenAmount,
    pub escrow_paid: TokenAmount,
    pub escrow_burned: TokenAmount,
    pub treasury_invested: TokenAmount,
    pub treasury_redeemed: TokenAmount,
    pub treasury_shares: String,
    /// Spendable balance at the end of the run.
    pub liquid: TokenAmount,
}

/// Headline numbers derived from the epoch history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub initial_supply: TokenAmount,
    pub final_supply: TokenAmount,
    pub duration_blocks: u64,
    pub total_minted: TokenAmount,
    pub total_burned: TokenAmount,
    pub fee_burned: TokenAmount,
    pub penalty_burned: TokenAmount,
    pub escrow_burned: TokenAmount,
    pub fees_charged: TokenAmount,
    pub tips: TokenAmount,
    pub net_supply_growth: SignedTokenAmount,
    /// Net growth over the initial supply, annualized linearly.
    pub realized_inflation: String,
    pub realized_inflation_precise: String,
    pub realized_inflation_exact: SignedRate,
    pub tx_included: u64,
    pub tx_dropped: u64,
    pub blocks_produced: u64,
    pub blocks_by_standby: u64,
    pub blocks_skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub validators: u32,
    pub standbys: u32,
    pub avg_validator_earnings: TokenAmount,
    pub avg_standby_earnings: TokenAmount,
    /// Rounding remainders held back from proportional fee and loyalty
    /// payouts at the end of the run.
    pub fee_dust: TokenAmount,
    pub loyalty_dust: TokenAmount,
    pub treasury_fund: TokenAmount,
    pub treasury_allocated: TokenAmount,
    pub treasury_collected: TokenAmount,
    pub escrow_balance: TokenAmount,
    pub final_base_fee: TokenAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeInfo {
    pub name: String,
    pub validator_rate: String,
    pub standby_rate: String,
    pub burns_fees: bool,
    pub loyalty_mode: bool,
    pub fee_share: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub seed: u64,
    pub granularity: String,
    pub scheme: SchemeInfo,
    pub summary: Summary,
    pub nodes: Vec<NodeReport>,
    pub timeseries: Vec<EpochRow>,
    /// Fully resolved input; loading it reproduces this run.
    pub config: Value,
}

impl SimulationReport {
    /// Pretty JSON with a trailing newline; keys follow declaration order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("history is empty")]
    EmptyHistory,
    #[error("initial supply is zero")]
    ZeroSupply,
    #[error(transparent)]
    Math(#[from] MathError),
}

/// `(minted - burned) / initial_supply · blocks_per_year / duration`.
pub fn annualized_rate(
    minted: TokenAmount,
    burned: TokenAmount,
    initial_supply: TokenAmount,
    duration_blocks: u64,
    blocks_per_year: u64,
) -> Result<SignedRate, MetricsError> {
    if initial_supply.is_zero() {
        return Err(MetricsError::ZeroSupply);
    }
    if duration_blocks == 0 {
        return Err(MetricsError::EmptyHistory);
    }
    let net = SignedTokenAmount::difference(minted, burned)?;
    let num = net.magnitude().atoms().checked_mul(blocks_per_year as u128).ok_or(MathError::Overflow)?;
    let den = initial_supply.atoms().checked_mul(duration_blocks as u128).ok_or(MathError::Overflow)?;
    let magnitude = Rate::new(num, den).map_err(|_| MathError::DivisionByZero)?;
    Ok(SignedRate { negative: net.is_negative(), magnitude })
}

pub fn compute_metrics(
    initial_supply: TokenAmount,
    history: &[EpochRow],
    blocks_per_year: u64,
) -> Result<Metrics, MetricsError> {
    let last = history.last().ok_or(MetricsError::EmptyHistory)?;
    let mut m = Metrics {
        initial_supply,
        final_supply: last.supply,
        duration_blocks: last.end_height,
        total_minted: TokenAmount::ZERO,
        total_burned: TokenAmount::ZERO,
        fee_burned: TokenAmount::ZERO,
        penalty_burned: TokenAmount::ZERO,
        escrow_burned: TokenAmount::ZERO,
        fees_charged: TokenAmount::ZERO,
        tips: TokenAmount::ZERO,
        net_supply_growth: SignedTokenAmount::default(),
        realized_inflation: String::new(),
        realized_inflation_precise: String::new(),
        realized_inflation_exact: SignedRate { negative: false, magnitude: Rate::ZERO },
        tx_included: 0,
        tx_dropped: 0,
        blocks_produced: 0,
        blocks_by_standby: 0,
        blocks_skipped: 0,
    };
    for r in history {
        m.total_minted = m.total_minted.checked_add(r.minted)?;
        m.total_burned = m.total_burned.checked_add(r.burned)?;
        m.fee_burned = m.fee_burned.checked_add(r.fee_burned)?;
        m.penalty_burned = m.penalty_burned.checked_add(r.penalty_burned)?;
        m.escrow_burned = m.escrow_burned.checked_add(r.escrow_burned)?;
        m.fees_charged = m.fees_charged.checked_add(r.fees_charged)?;
        m.tips = m.tips.checked_add(r.tips)?;
        m.tx_included += r.tx_included;
        m.tx_dropped += r.tx_dropped;
        m.blocks_produced += r.blocks_produced;
        m.blocks_by_standby += r.blocks_by_standby;
        m.blocks_skipped += r.blocks_skipped;
    }
    m.net_supply_growth = SignedTokenAmount::difference(m.total_minted, m.total_burned)?;
    let rate = annualized_rate(m.total_minted, m.total_burned, initial_supply, m.duration_blocks, blocks_per_year)?;
    m.realized_inflation = rate.to_percent_string(3);
    m.realized_inflation_precise = rate.to_percent_string(6);
    m.realized_inflation_exact = rate;
    Ok(m)
}
