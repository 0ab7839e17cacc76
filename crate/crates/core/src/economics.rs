//! Closed-form network economics: annual emission, inflation, daily fee
//! revenue and the income effect of scaling fees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::math::MathError;
use crate::rate::Rate;

/// Reward-bearing days per year.
pub const DAYS_PER_YEAR: u128 = 365;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EconomicsError {
    #[error("invalid network parameters: {0}")]
    InvalidParams(&'static str),
    #[error("total supply must be positive")]
    ZeroSupply,
    #[error("fee multiplier must be at least 1")]
    ZeroMultiplier,
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub n_validators: u32,
    pub n_standby: u32,
    pub stake_per_node: TokenAmount,
    pub validator_rate: Rate,
    pub standby_rate: Rate,
    pub total_supply: TokenAmount,
}

impl NetworkParams {
    /// 108 validators and 108 standbys at 10,000,000 staked each, 10% / 8%
    /// annual rates, against a circulating supply of 37,936,724,971.
    pub fn xdc_mainnet_2024() -> Self {
        NetworkParams {
            n_validators: 108,
            n_standby: 108,
            stake_per_node: TokenAmount::from_tokens(10_000_000),
            validator_rate: Rate::percent(10),
            standby_rate: Rate::percent(8),
            total_supply: TokenAmount::from_tokens(37_936_724_971),
        }
    }

    pub fn validate(&self) -> Result<(), EconomicsError> {
        if self.n_validators == 0 {
            return Err(EconomicsError::InvalidParams("n_validators must be positive"));
        }
        if self.n_standby == 0 {
            return Err(EconomicsError::InvalidParams("n_standby must be positive"));
        }
        if self.stake_per_node.is_zero() {
            return Err(EconomicsError::InvalidParams("stake_per_node must be positive"));
        }
        Ok(())
    }
}

/// Tokens minted per year to pay the role-based staking income.
pub fn annual_emission(params: &NetworkParams) -> Result<TokenAmount, EconomicsError> {
    params.validate()?;
    let validators = params
        .stake_per_node
        .checked_mul(params.n_validators as u128)?
        .mul_rate(params.validator_rate)?;
    let standbys = params
        .stake_per_node
        .checked_mul(params.n_standby as u128)?
        .mul_rate(params.standby_rate)?;
    Ok(validators.checked_add(standbys)?)
}

/// Exact `emission / supply`.
pub fn inflation_rate(emission: TokenAmount, supply: TokenAmount) -> Result<Rate, EconomicsError> {
    if supply.is_zero() {
        return Err(EconomicsError::ZeroSupply);
    }
    Ok(emission.ratio(supply)?)
}

/// Network fee revenue for one day: price per gas × gas per tx × tx count.
pub fn daily_transaction_fee(
    gas_price: TokenAmount,
    avg_gas_used: u64,
    daily_tx_count: u64,
) -> Result<TokenAmount, EconomicsError> {
    Ok(gas_price
        .checked_mul(avg_gas_used as u128)?
        .checked_mul(daily_tx_count as u128)?)
}

/// Relative change in one validator's annual income when network-wide daily
/// fees are scaled by `multiplier`, with fees shared evenly across validators.
///
/// `(m - 1)·F·365/n  /  (F·365/n + stake·validator_rate)`
pub fn fee_scaling_income_delta(
    multiplier: u64,
    baseline_daily_network_fee: TokenAmount,
    params: &NetworkParams,
) -> Result<Rate, EconomicsError> {
    if multiplier == 0 {
        return Err(EconomicsError::ZeroMultiplier);
    }
    if params.n_validators == 0 {
        return Err(EconomicsError::InvalidParams("n_validators must be positive"));
    }
    let rate = params.validator_rate;
    let annual_fees = baseline_daily_network_fee.atoms().checked_mul(DAYS_PER_YEAR).ok_or(MathError::Overflow)?;
    // scale everything by n_validators · rate.den so both terms are integers
    let fee_term = annual_fees.checked_mul(rate.denom()).ok_or(MathError::Overflow)?;
    let stake_term = params
        .stake_per_node
        .atoms()
        .checked_mul(rate.numer())
        .and_then(|x| x.checked_mul(params.n_validators as u128))
        .ok_or(MathError::Overflow)?;
    let delta = fee_term.checked_mul((multiplier - 1) as u128).ok_or(MathError::Overflow)?;
    let base = fee_term.checked_add(stake_term).ok_or(MathError::Overflow)?;
    if base == 0 {
        return Ok(Rate::ZERO);
    }
    Rate::new(delta, base).map_err(|_| EconomicsError::Math(MathError::DivisionByZero))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(n: u128) -> TokenAmount {
        TokenAmount::from_tokens(n)
    }

    #[test]
    fn paper_emission_total() {
        let p = NetworkParams::xdc_mainnet_2024();
        assert_eq!(annual_emission(&p).unwrap(), tokens(194_400_000));
    }

    #[test]
    fn zero_rates_emit_nothing() {
        let p = NetworkParams {
            validator_rate: Rate::ZERO,
            standby_rate: Rate::ZERO,
            ..NetworkParams::xdc_mainnet_2024()
        };
        assert_eq!(annual_emission(&p).unwrap(), TokenAmount::ZERO);
    }

    #[test]
    fn single_node_each() {
        let p = NetworkParams {
            n_validators: 1,
            n_standby: 1,
            stake_per_node: tokens(100),
            ..NetworkParams::xdc_mainnet_2024()
        };
        assert_eq!(annual_emission(&p).unwrap(), tokens(18));
    }

    #[test]
    fn invalid_counts_rejected() {
        let p = NetworkParams { n_validators: 0, ..NetworkParams::xdc_mainnet_2024() };
        assert!(matches!(annual_emission(&p), Err(EconomicsError::InvalidParams(_))));
        let p = NetworkParams { stake_per_node: TokenAmount::ZERO, ..NetworkParams::xdc_mainnet_2024() };
        assert!(annual_emission(&p).is_err());
    }

    #[test]
    fn inflation_examples() {
        let r = inflation_rate(tokens(194_400_000), tokens(37_936_724_971)).unwrap();
        assert_eq!(r.to_percent_string(3), "0.512%");
        assert_eq!(inflation_rate(TokenAmount::ZERO, tokens(5)).unwrap(), Rate::ZERO);
        assert_eq!(inflation_rate(tokens(1), tokens(4)).unwrap().to_percent_string(3), "25.000%");
        assert_eq!(inflation_rate(tokens(1), TokenAmount::ZERO), Err(EconomicsError::ZeroSupply));
    }

    #[test]
    fn daily_fee_examples() {
        assert_eq!(
            daily_transaction_fee(TokenAmount::from_atoms(1), 2, 3).unwrap(),
            TokenAmount::from_atoms(6)
        );
        // 0.0002 per gas × 21,000 gas × 10,000 tx
        let price: TokenAmount = "0.0002".parse().unwrap();
        assert_eq!(daily_transaction_fee(price, 21_000, 10_000).unwrap(), tokens(42_000));
        assert_eq!(daily_transaction_fee(price, 0, 10_000).unwrap(), TokenAmount::ZERO);
    }

    #[test]
    fn income_delta_examples() {
        let p = NetworkParams::xdc_mainnet_2024();
        let d = fee_scaling_income_delta(50, tokens(30), &p).unwrap();
        // 49·30·365 / (30·365 + 108·1,000,000)
        assert_eq!(d, Rate::new(536_550, 108_010_950).unwrap());
        assert_eq!(d.to_percent_string(3), "0.497%");
        assert!(d < Rate::new(5, 1000).unwrap());
        assert_eq!(fee_scaling_income_delta(1, tokens(30), &p).unwrap(), Rate::ZERO);
        assert_eq!(fee_scaling_income_delta(50, TokenAmount::ZERO, &p).unwrap(), Rate::ZERO);
        assert_eq!(fee_scaling_income_delta(0, tokens(1), &p), Err(EconomicsError::ZeroMultiplier));
    }
}
