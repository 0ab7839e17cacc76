//! Dual-component fee market: an algorithmic per-gas base fee that moves by
//! at most 12.5% per block, TPS-driven fee tiers, and priority tips.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::math::{mul_div_floor, MathError};
use crate::rate::Rate;

/// The base fee moves by at most `1 / BASE_FEE_MAX_CHANGE_DENOMINATOR` per block.
pub const BASE_FEE_MAX_CHANGE_DENOMINATOR: u128 = 8;
/// Blocks may hold up to this multiple of the gas target.
pub const ELASTICITY_MULTIPLIER: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeeMarketError {
    #[error("block used {used} gas but the limit is {limit}")]
    GasAboveLimit { used: u64, limit: u64 },
    #[error("gas target must be positive")]
    ZeroGasTarget,
    #[error("base fee must be at least one atom")]
    ZeroBaseFee,
    #[error("invalid fee tier table: {0}")]
    InvalidTiers(&'static str),
    #[error("invalid tip bounds: need 0 < min_tip <= max_tip")]
    InvalidTipBounds,
    #[error("transaction gas must be positive")]
    ZeroGas,
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeTier {
    /// Inclusive lower bound of the TPS ratio for this tier.
    pub lower_bound: Rate,
    pub multiplier: u64,
}

/// Fee multiplier tiers keyed on the TPS ratio. Tiers are lower-inclusive,
/// half-open; ratios below the first bound use the first tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeTierTable {
    tiers: Vec<FeeTier>,
    tip_activation_ratio: Rate,
}

impl FeeTierTable {
    pub fn new(tiers: Vec<FeeTier>, tip_activation_ratio: Rate) -> Result<Self, FeeMarketError> {
        if tiers.is_empty() {
            return Err(FeeMarketError::InvalidTiers("at least one tier required"));
        }
        for w in tiers.windows(2) {
            if w[1].lower_bound <= w[0].lower_bound {
                return Err(FeeMarketError::InvalidTiers("lower bounds must be strictly increasing"));
            }
            if w[1].multiplier < w[0].multiplier {
                return Err(FeeMarketError::InvalidTiers("multipliers must be non-decreasing"));
            }
        }
        if tiers.iter().any(|t| t.multiplier == 0) {
            return Err(FeeMarketError::InvalidTiers("multipliers must be positive"));
        }
        Ok(FeeTierTable { tiers, tip_activation_ratio })
    }

    /// 1-5: 1x, 5-12: 10x, 12-25: 20x, 25-50: 50x, 50-100: 100x, 100+: tips.
    pub fn xdc_default() -> Self {
        let tier = |lo: u128, m: u64| FeeTier { lower_bound: Rate::integer(lo), multiplier: m };
        FeeTierTable::new(
            vec![tier(1, 1), tier(5, 10), tier(12, 20), tier(25, 50), tier(50, 100)],
            Rate::integer(100),
        )
        .expect("default table is valid")
    }

    pub fn tiers(&self) -> &[FeeTier] {
        &self.tiers
    }

    pub fn tip_activation_ratio(&self) -> Rate {
        self.tip_activation_ratio
    }

    pub fn top_multiplier(&self) -> u64 {
        self.tiers.last().map(|t| t.multiplier).unwrap_or(1)
    }
}

impl Default for FeeTierTable {
    fn default() -> Self {
        Self::xdc_default()
    }
}

/// Multiplier of the highest tier whose lower bound is `<= tps_ratio`.
pub fn fee_multiplier(tps_ratio: Rate, table: &FeeTierTable) -> u64 {
    table
        .tiers
        .iter()
        .rev()
        .find(|t| t.lower_bound <= tps_ratio)
        .unwrap_or(&table.tiers[0])
        .multiplier
}

pub fn tip_active(tps_ratio: Rate, table: &FeeTierTable) -> bool {
    tps_ratio >= table.tip_activation_ratio
}

/// What happens to the tier multiplier once the tip mechanism switches on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipMode {
    /// Tips are added on top of the top-tier multiplier.
    #[default]
    Augment,
    /// Tips replace tier escalation; the multiplier falls back to 1.
    Replace,
}

/// Multiplier applied to the base fee given the tip mode.
pub fn effective_multiplier(tps_ratio: Rate, table: &FeeTierTable, mode: TipMode) -> u64 {
    match mode {
        TipMode::Replace if tip_active(tps_ratio, table) => 1,
        _ => fee_multiplier(tps_ratio, table),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TipConfig {
    pub min_tip: TokenAmount,
    pub max_tip: TokenAmount,
}

impl TipConfig {
    pub fn new(min_tip: TokenAmount, max_tip: TokenAmount) -> Result<Self, FeeMarketError> {
        if min_tip.is_zero() || min_tip > max_tip {
            return Err(FeeMarketError::InvalidTipBounds);
        }
        Ok(TipConfig { min_tip, max_tip })
    }
}

impl Default for TipConfig {
    /// 0.001 to 0.01 per transaction.
    fn default() -> Self {
        TipConfig {
            min_tip: TokenAmount::from_atoms(1_000_000_000_000_000),
            max_tip: TokenAmount::from_atoms(10_000_000_000_000_000),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transaction {
    pub id: u64,
    pub gas_used: u64,
    pub tip: TokenAmount,
    pub submitted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeeMarketState {
    pub base_fee: TokenAmount,
    pub gas_target: u64,
    pub gas_limit: u64,
    /// Floor for the base fee; at least one atom so the update can recover.
    pub min_base_fee: TokenAmount,
    pub tier_table: FeeTierTable,
    pub tip_config: TipConfig,
}

impl FeeMarketState {
    pub fn new(
        base_fee: TokenAmount,
        gas_target: u64,
        tier_table: FeeTierTable,
        tip_config: TipConfig,
    ) -> Result<Self, FeeMarketError> {
        if gas_target == 0 {
            return Err(FeeMarketError::ZeroGasTarget);
        }
        if base_fee.is_zero() {
            return Err(FeeMarketError::ZeroBaseFee);
        }
        let gas_limit = gas_target
            .checked_mul(ELASTICITY_MULTIPLIER)
            .ok_or(MathError::Overflow)?;
        Ok(FeeMarketState {
            base_fee,
            gas_target,
            gas_limit,
            min_base_fee: TokenAmount::ONE_ATOM,
            tier_table,
            tip_config,
        })
    }

    pub fn with_min_base_fee(mut self, floor: TokenAmount) -> Result<Self, FeeMarketError> {
        if floor.is_zero() {
            return Err(FeeMarketError::ZeroBaseFee);
        }
        self.min_base_fee = floor;
        self.base_fee = self.base_fee.max(floor);
        Ok(self)
    }
}

/// Base fee for the block after one that used `gas_used_in_block` gas.
///
/// `floor(base · (7·target + used) / (8·target))`, which is the linear
/// update `base · (1 + (used - target) / target / 8)`: unchanged at target,
/// ×9/8 when full, ×7/8 when empty. Above target the fee rises by at least
/// one atom so it can climb back from the floor.
pub fn next_base_fee(state: &FeeMarketState, gas_used_in_block: u64) -> Result<TokenAmount, FeeMarketError> {
    if gas_used_in_block > state.gas_limit {
        return Err(FeeMarketError::GasAboveLimit {
            used: gas_used_in_block,
            limit: state.gas_limit,
        });
    }
    let target = state.gas_target as u128;
    let d = BASE_FEE_MAX_CHANGE_DENOMINATOR;
    let num = (d - 1) * target + gas_used_in_block as u128;
    let base = state.base_fee.atoms();
    let mut next = mul_div_floor(base, num, d * target)?;
    if gas_used_in_block > state.gas_target && next == base {
        next = base.checked_add(1).ok_or(MathError::Overflow)?;
    }
    Ok(TokenAmount::from_atoms(next).max(state.min_base_fee))
}

/// Stable sort by descending tip; equal tips keep submission order.
pub fn order_by_tip(mut pending: Vec<Transaction>) -> Vec<Transaction> {
    pending.sort_by_key(|t| std::cmp::Reverse(t.tip));
    pending
}

/// Charge for one transaction, split into the algorithmic base component
/// (`base_fee · multiplier · gas`) and the producer's tip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeeSplit {
    /// Burned under burning schemes, distributed otherwise.
    pub burned: TokenAmount,
    pub to_validator: TokenAmount,
}

impl FeeSplit {
    pub fn total(&self) -> Result<TokenAmount, MathError> {
        self.burned.checked_add(self.to_validator)
    }
}

pub fn split_fee(tx: &Transaction, base_fee: TokenAmount, multiplier: u64) -> Result<FeeSplit, FeeMarketError> {
    if tx.gas_used == 0 {
        return Err(FeeMarketError::ZeroGas);
    }
    let burned = base_fee
        .checked_mul(multiplier as u128)?
        .checked_mul(tx.gas_used as u128)?;
    Ok(FeeSplit { burned, to_validator: tx.tip })
}
