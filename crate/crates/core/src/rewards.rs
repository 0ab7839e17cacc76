//! Per-scheme earnings and the issuance/burn identities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::{SignedTokenAmount, TokenAmount};
use crate::math::MathError;
use crate::rate::{Rate, RateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("unknown reward scheme `{0}` (expected current, scheme1, scheme2 or eth_style)")]
    UnknownScheme(String),
    #[error("period fraction must be in (0, 1], got {0}")]
    InvalidPeriod(Rate),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[serde(rename = "current")]
    CurrentModel,
    Scheme1,
    Scheme2,
    EthStyle,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::CurrentModel => "current",
            SchemeKind::Scheme1 => "scheme1",
            SchemeKind::Scheme2 => "scheme2",
            SchemeKind::EthStyle => "eth_style",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "current" | "current_model" => Ok(SchemeKind::CurrentModel),
            "scheme1" => Ok(SchemeKind::Scheme1),
            "scheme2" => Ok(SchemeKind::Scheme2),
            "eth_style" => Ok(SchemeKind::EthStyle),
            other => Err(RewardError::UnknownScheme(other.to_string())),
        }
    }
}

/// Where the algorithmic (non-tip) part of transaction fees goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeDisposition {
    /// Paid to validators together with tips.
    Distribute,
    /// Removed from supply; only tips reach validators.
    Burn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardScheme {
    pub kind: SchemeKind,
    pub validator_rate: Rate,
    pub standby_rate: Rate,
    pub fee_disposition: FeeDisposition,
}

impl RewardScheme {
    /// Validators 10% plus fee share, standbys 8%.
    pub fn current_model() -> Self {
        RewardScheme {
            kind: SchemeKind::CurrentModel,
            validator_rate: Rate::percent(10),
            standby_rate: Rate::percent(8),
            fee_disposition: FeeDisposition::Distribute,
        }
    }

    /// Flat 9% for both roles; producers keep the fees of their blocks.
    pub fn scheme1() -> Self {
        RewardScheme {
            kind: SchemeKind::Scheme1,
            validator_rate: Rate::percent(9),
            standby_rate: Rate::percent(9),
            fee_disposition: FeeDisposition::Distribute,
        }
    }

    /// Validators 10% plus tips, standbys 8%, transaction fee burned.
    pub fn scheme2() -> Self {
        RewardScheme {
            kind: SchemeKind::Scheme2,
            validator_rate: Rate::percent(10),
            standby_rate: Rate::percent(8),
            fee_disposition: FeeDisposition::Burn,
        }
    }

    /// Uniform issuance on all stake, base fee burned, tips to producers.
    pub fn eth_style(issuance_rate: Rate) -> Self {
        RewardScheme {
            kind: SchemeKind::EthStyle,
            validator_rate: issuance_rate,
            standby_rate: issuance_rate,
            fee_disposition: FeeDisposition::Burn,
        }
    }

    pub fn for_kind(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::CurrentModel => Self::current_model(),
            SchemeKind::Scheme1 => Self::scheme1(),
            SchemeKind::Scheme2 => Self::scheme2(),
            SchemeKind::EthStyle => Self::eth_style(Rate::percent(10)),
        }
    }

    pub fn burns_fees(&self) -> bool {
        self.fee_disposition == FeeDisposition::Burn
    }
}

impl FromStr for RewardScheme {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<SchemeKind>().map(RewardScheme::for_kind)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarningsBreakdown {
    pub staking_reward: TokenAmount,
    pub fee_share: TokenAmount,
    pub tips: TokenAmount,
    /// Penalties actually taken from this period's rewards.
    pub penalties: TokenAmount,
    pub total: TokenAmount,
    /// Penalty in excess of the period's rewards, to be taken from stake.
    pub stake_slash: TokenAmount,
}

impl EarningsBreakdown {
    pub fn gross(&self) -> Result<TokenAmount, MathError> {
        self.staking_reward.checked_add(self.fee_share)?.checked_add(self.tips)
    }

    /// Applies penalties against this period's gross income first; any excess
    /// becomes `stake_slash`.
    pub fn settle(staking_reward: TokenAmount, fee_share: TokenAmount, tips: TokenAmount, penalties: TokenAmount) -> Result<Self, MathError> {
        let gross = staking_reward.checked_add(fee_share)?.checked_add(tips)?;
        let applied = penalties.min(gross);
        Ok(EarningsBreakdown {
            staking_reward,
            fee_share,
            tips,
            penalties: applied,
            total: gross.checked_sub(applied)?,
            stake_slash: penalties.checked_sub(applied)?,
        })
    }
}

fn check_period(period_fraction: Rate) -> Result<(), RewardError> {
    if period_fraction.is_zero() || period_fraction > Rate::ONE {
        return Err(RewardError::InvalidPeriod(period_fraction));
    }
    Ok(())
}

/// `floor(stake · annual_rate · period_fraction)`.
pub fn staking_reward(stake: TokenAmount, annual_rate: Rate, period_fraction: Rate) -> Result<TokenAmount, RewardError> {
    let r = annual_rate.checked_mul(period_fraction)?;
    Ok(stake.mul_rate(r)?)
}

/// Earnings of a validator over `period_fraction` of a year. Under burning
/// schemes the fee share is not paid out; tips always are.
pub fn validator_earnings(
    scheme: &RewardScheme,
    stake: TokenAmount,
    fee_share: TokenAmount,
    tips: TokenAmount,
    penalties: TokenAmount,
    period_fraction: Rate,
) -> Result<EarningsBreakdown, RewardError> {
    check_period(period_fraction)?;
    let reward = staking_reward(stake, scheme.validator_rate, period_fraction)?;
    let fee_share = match scheme.fee_disposition {
        FeeDisposition::Distribute => fee_share,
        FeeDisposition::Burn => TokenAmount::ZERO,
    };
    Ok(EarningsBreakdown::settle(reward, fee_share, tips, penalties)?)
}

/// Earnings of a standby node: fixed staking income only.
pub fn standby_earnings(scheme: &RewardScheme, stake: TokenAmount, period_fraction: Rate) -> Result<EarningsBreakdown, RewardError> {
    check_period(period_fraction)?;
    let reward = staking_reward(stake, scheme.standby_rate, period_fraction)?;
    Ok(EarningsBreakdown::settle(reward, TokenAmount::ZERO, TokenAmount::ZERO, TokenAmount::ZERO)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewardOutcome {
    pub total: TokenAmount,
    /// Shortfall when penalties exceed issuance plus tips.
    pub slash: TokenAmount,
}

/// Issuance plus tips minus penalties, saturating at zero with the shortfall
/// reported as a stake slash.
pub fn eth_total_rewards(issuance: TokenAmount, tips: TokenAmount, penalties: TokenAmount) -> Result<RewardOutcome, MathError> {
    let gross = issuance.checked_add(tips)?;
    Ok(RewardOutcome {
        total: gross.saturating_sub(penalties),
        slash: penalties.saturating_sub(gross),
    })
}

/// `total_staked · issuance_rate - total_burned`, negative when burning
/// outpaces issuance.
pub fn net_supply_growth(total_staked: TokenAmount, issuance_rate: Rate, total_burned: TokenAmount) -> Result<SignedTokenAmount, MathError> {
    let issued = total_staked.mul_rate(issuance_rate)?;
    SignedTokenAmount::difference(issued, total_burned)
}
