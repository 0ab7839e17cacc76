//! Reward escrow: rewards accumulate per node and leave only through
//! threshold-gated withdrawals whose fee is burned. The fee falls with the
//! withdrawn amount and with the age of the withdrawn rewards.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::ledger::NodeId;
use crate::math::MathError;
use crate::rate::{Rate, RateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EscrowError {
    #[error("accrual amount must be positive")]
    ZeroAccrual,
    #[error("withdrawal of {amount} is below the threshold {threshold}")]
    BelowThreshold { amount: TokenAmount, threshold: TokenAmount },
    #[error("insufficient escrow balance: have {balance}, requested {requested}")]
    InsufficientBalance { balance: TokenAmount, requested: TokenAmount },
    #[error("invalid withdrawal fee table: {0}")]
    InvalidTable(&'static str),
    #[error("deposit height {deposit} is after withdrawal height {now}")]
    TimeReversal { deposit: u64, now: u64 },
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// How the tier fee shrinks as the withdrawn rewards age.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// `rate · max(0, 1 - age / zero_fee_age)`.
    #[default]
    Linear,
    /// Full tier rate until `zero_fee_age`, then zero.
    Step,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeTierRow {
    pub amount_lower_bound: TokenAmount,
    pub fee_rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalFeeTable {
    tiers: Vec<FeeTierRow>,
    /// Age, in blocks, at which withdrawals become free.
    zero_fee_age: u64,
    decay: DecayMode,
    threshold: TokenAmount,
}

impl WithdrawalFeeTable {
    pub fn new(
        tiers: Vec<FeeTierRow>,
        zero_fee_age: u64,
        decay: DecayMode,
        threshold: TokenAmount,
    ) -> Result<Self, EscrowError> {
        if tiers.is_empty() {
            return Err(EscrowError::InvalidTable("at least one tier required"));
        }
        if zero_fee_age == 0 {
            return Err(EscrowError::InvalidTable("zero-fee age must be positive"));
        }
        for w in tiers.windows(2) {
            if w[1].amount_lower_bound <= w[0].amount_lower_bound {
                return Err(EscrowError::InvalidTable("amount bounds must be strictly increasing"));
            }
            if w[1].fee_rate > w[0].fee_rate {
                return Err(EscrowError::InvalidTable("fee rates must be non-increasing"));
            }
        }
        if tiers.iter().any(|t| t.fee_rate > Rate::ONE) {
            return Err(EscrowError::InvalidTable("fee rates must not exceed 100%"));
        }
        if threshold < tiers[0].amount_lower_bound {
            return Err(EscrowError::InvalidTable("threshold below the smallest tier"));
        }
        Ok(WithdrawalFeeTable { tiers, zero_fee_age, decay, threshold })
    }

    /// 1,000: 50%, 10,000: 30%, 100,000: 20%, 1,000,000: 20% falling to 0%
    /// at one year. Threshold 1,000.
    pub fn xdc_default(blocks_per_year: u64) -> Self {
        let row = |amount: u128, pct: u128| FeeTierRow {
            amount_lower_bound: TokenAmount::from_tokens(amount),
            fee_rate: Rate::percent(pct),
        };
        WithdrawalFeeTable::new(
            vec![row(1_000, 50), row(10_000, 30), row(100_000, 20), row(1_000_000, 20)],
            blocks_per_year,
            DecayMode::Linear,
            TokenAmount::from_tokens(1_000),
        )
        .expect("default withdrawal table is valid")
    }

    pub fn tiers(&self) -> &[FeeTierRow] {
        &self.tiers
    }

    pub fn zero_fee_age(&self) -> u64 {
        self.zero_fee_age
    }

    pub fn decay(&self) -> DecayMode {
        self.decay
    }

    pub fn threshold(&self) -> TokenAmount {
        self.threshold
    }

    pub fn min_amount(&self) -> TokenAmount {
        self.tiers[0].amount_lower_bound
    }
}

/// Fee rate for withdrawing `amount` whose rewards are `age` blocks old.
pub fn withdrawal_fee(amount: TokenAmount, age: Rate, table: &WithdrawalFeeTable) -> Result<Rate, EscrowError> {
    let tier = table
        .tiers
        .iter()
        .rev()
        .find(|t| t.amount_lower_bound <= amount)
        .ok_or(EscrowError::BelowThreshold { amount, threshold: table.min_amount() })?;
    let z = Rate::integer(table.zero_fee_age as u128);
    let factor = match table.decay {
        DecayMode::Linear => age.checked_div(z)?.complement(),
        DecayMode::Step if age >= z => Rate::ZERO,
        DecayMode::Step => Rate::ONE,
    };
    Ok(tier.fee_rate.checked_mul(factor)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Deposit {
    pub height: u64,
    /// Amount of this deposit not yet withdrawn.
    pub amount: TokenAmount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Withdrawal {
    pub payout: TokenAmount,
    pub burned: TokenAmount,
    pub fee_rate: Rate,
    /// Amount-weighted age, in blocks, of the rewards consumed.
    pub age: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscrowAccount {
    pub node: NodeId,
    balance: TokenAmount,
    deposits: VecDeque<Deposit>,
    total_accrued: TokenAmount,
    total_paid: TokenAmount,
    total_burned: TokenAmount,
}

impl EscrowAccount {
    pub fn new(node: NodeId) -> Self {
        EscrowAccount {
            node,
            balance: TokenAmount::ZERO,
            deposits: VecDeque::new(),
            total_accrued: TokenAmount::ZERO,
            total_paid: TokenAmount::ZERO,
            total_burned: TokenAmount::ZERO,
        }
    }

    pub fn balance(&self) -> TokenAmount {
        self.balance
    }

    pub fn deposits(&self) -> impl Iterator<Item = &Deposit> {
        self.deposits.iter()
    }

    pub fn total_accrued(&self) -> TokenAmount {
        self.total_accrued
    }

    pub fn total_paid(&self) -> TokenAmount {
        self.total_paid
    }

    pub fn total_burned(&self) -> TokenAmount {
        self.total_burned
    }

    /// Height of the oldest unconsumed deposit.
    pub fn oldest_deposit(&self) -> Option<u64> {
        self.deposits.front().map(|d| d.height)
    }

    pub fn accrue(&mut self, amount: TokenAmount, now: u64) -> Result<(), EscrowError> {
        if amount.is_zero() {
            return Err(EscrowError::ZeroAccrual);
        }
        let balance = self.balance.checked_add(amount)?;
        let accrued = self.total_accrued.checked_add(amount)?;
        self.balance = balance;
        self.total_accrued = accrued;
        match self.deposits.back_mut() {
            Some(last) if last.height == now => last.amount = last.amount.checked_add(amount)?,
            _ => self.deposits.push_back(Deposit { height: now, amount }),
        }
        Ok(())
    }

    /// Age, in blocks, that withdrawing `amount` now would have, consuming
    /// deposits oldest first.
    pub fn withdrawal_age(&self, amount: TokenAmount, now: u64) -> Result<Rate, EscrowError> {
        if amount.is_zero() {
            return Ok(Rate::ZERO);
        }
        let mut remaining = amount;
        let mut weighted: u128 = 0;
        for d in &self.deposits {
            if remaining.is_zero() {
                break;
            }
            let take = remaining.min(d.amount);
            let dt = now.checked_sub(d.height).ok_or(EscrowError::TimeReversal { deposit: d.height, now })?;
            weighted = take
                .atoms()
                .checked_mul(dt as u128)
                .and_then(|x| x.checked_add(weighted))
                .ok_or(MathError::Overflow)?;
            remaining = remaining.checked_sub(take)?;
        }
        if !remaining.is_zero() {
            return Err(EscrowError::InsufficientBalance { balance: self.balance, requested: amount });
        }
        Ok(Rate::new(weighted, amount.atoms())?)
    }

    pub fn withdraw(&mut self, amount: TokenAmount, now: u64, table: &WithdrawalFeeTable) -> Result<Withdrawal, EscrowError> {
        if amount < table.threshold {
            return Err(EscrowError::BelowThreshold { amount, threshold: table.threshold });
        }
        if amount > self.balance {
            return Err(EscrowError::InsufficientBalance { balance: self.balance, requested: amount });
        }
        let age = self.withdrawal_age(amount, now)?;
        let fee_rate = withdrawal_fee(amount, age, table)?;
        let burned = amount.mul_rate(fee_rate)?;
        let payout = amount.checked_sub(burned)?;

        let mut remaining = amount;
        while !remaining.is_zero() {
            let front = self.deposits.front_mut().expect("balance covers the withdrawal");
            let take = remaining.min(front.amount);
            front.amount = front.amount.checked_sub(take)?;
            remaining = remaining.checked_sub(take)?;
            if front.amount.is_zero() {
                self.deposits.pop_front();
            }
        }
        self.balance = self.balance.checked_sub(amount)?;
        self.total_paid = self.total_paid.checked_add(payout)?;
        self.total_burned = self.total_burned.checked_add(burned)?;
        Ok(Withdrawal { payout, burned, fee_rate, age })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const YEAR: u64 = 15_768_000;

    fn t(n: u128) -> TokenAmount {
        TokenAmount::from_tokens(n)
    }

    fn table() -> WithdrawalFeeTable {
        WithdrawalFeeTable::xdc_default(YEAR)
    }

    #[test]
    fn accrue_examples() {
        let mut e = EscrowAccount::new(NodeId(1));
        e.accrue(t(100), 0).unwrap();
        assert_eq!(e.balance(), t(100));
        let mut e = EscrowAccount::new(NodeId(1));
        e.accrue(t(50), 1).unwrap();
        e.accrue(t(70), 2).unwrap();
        assert_eq!(e.balance(), t(120));
        assert_eq!(e.deposits().count(), 2);
        assert_eq!(e.accrue(TokenAmount::ZERO, 3), Err(EscrowError::ZeroAccrual));
    }

    #[test]
    fn fee_table_rows() {
        let tb = table();
        let year = Rate::integer(YEAR as u128);
        assert_eq!(withdrawal_fee(t(1_000), Rate::ZERO, &tb).unwrap(), Rate::percent(50));
        assert_eq!(withdrawal_fee(t(10_000), Rate::ZERO, &tb).unwrap(), Rate::percent(30));
        assert_eq!(withdrawal_fee(t(100_000), Rate::ZERO, &tb).unwrap(), Rate::percent(20));
        assert_eq!(withdrawal_fee(t(1_000_000), year, &tb).unwrap(), Rate::ZERO);
        let half = Rate::integer(YEAR as u128 / 2);
        assert_eq!(withdrawal_fee(t(1_000), half, &tb).unwrap(), Rate::percent(25));
        assert!(matches!(withdrawal_fee(t(999), Rate::ZERO, &tb), Err(EscrowError::BelowThreshold { .. })));
    }

    #[test]
    fn step_decay() {
        let tb = WithdrawalFeeTable::new(table().tiers().to_vec(), YEAR, DecayMode::Step, t(1_000)).unwrap();
        let almost = Rate::integer(YEAR as u128 - 1);
        assert_eq!(withdrawal_fee(t(1_000), almost, &tb).unwrap(), Rate::percent(50));
        assert_eq!(withdrawal_fee(t(1_000), Rate::integer(YEAR as u128), &tb).unwrap(), Rate::ZERO);
    }

    #[test]
    fn withdraw_examples() {
        let tb = table();
        let mut e = EscrowAccount::new(NodeId(1));
        e.accrue(t(2_000), 10).unwrap();
        let w = e.withdraw(t(1_000), 10, &tb).unwrap();
        assert_eq!((w.payout, w.burned), (t(500), t(500)));
        assert_eq!(e.balance(), t(1_000));

        let mut e = EscrowAccount::new(NodeId(1));
        e.accrue(t(1_000_000), 0).unwrap();
        let w = e.withdraw(t(1_000_000), YEAR, &tb).unwrap();
        assert_eq!((w.payout, w.burned), (t(1_000_000), TokenAmount::ZERO));

        assert!(matches!(e.withdraw(t(999), YEAR, &tb), Err(EscrowError::BelowThreshold { .. })));
        assert!(matches!(e.withdraw(t(1_000), YEAR, &tb), Err(EscrowError::InsufficientBalance { .. })));
    }

    #[test]
    fn fifo_age_is_amount_weighted() {
        let mut e = EscrowAccount::new(NodeId(1));
        e.accrue(t(600), 0).unwrap();
        e.accrue(t(600), 100).unwrap();
        // 600 at age 200 and 400 at age 100
        let age = e.withdrawal_age(t(1_000), 200).unwrap();
        assert_eq!(age, Rate::integer(160));
        e.withdraw(t(1_000), 200, &table()).unwrap();
        let left: Vec<_> = e.deposits().copied().collect();
        assert_eq!(left, vec![Deposit { height: 100, amount: t(200) }]);
    }

    #[test]
    fn table_validation() {
        let rows = table().tiers().to_vec();
        assert!(WithdrawalFeeTable::new(vec![], YEAR, DecayMode::Linear, t(1)).is_err());
        assert!(WithdrawalFeeTable::new(rows.clone(), 0, DecayMode::Linear, t(1_000)).is_err());
        assert!(WithdrawalFeeTable::new(rows.clone(), YEAR, DecayMode::Linear, t(999)).is_err());
        let mut rising = rows;
        rising[1].fee_rate = Rate::percent(60);
        assert!(WithdrawalFeeTable::new(rising, YEAR, DecayMode::Linear, t(1_000)).is_err());
    }
}
