//! Ecosystem treasury funded by reinvested rewards. Investors hold pro-rata
//! pool shares; the fund grants to projects by performance and grows from
//! the fees projects return.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::ledger::NodeId;
use crate::math::{mul_div_floor, MathError};
use crate::rate::{Rate, RateError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreasuryError {
    #[error("investment amount must be positive")]
    ZeroInvestment,
    #[error("fund is empty while shares are outstanding; share price is zero")]
    ZeroSharePrice,
    #[error("budget {budget} exceeds fund {fund}")]
    BudgetExceedsFund { budget: TokenAmount, fund: TokenAmount },
    #[error("all project performance scores are zero")]
    AllScoresZero,
    #[error("unknown project `{0}`")]
    UnknownProject(String),
    #[error("node {node} holds {held} shares, cannot redeem {requested}")]
    InsufficientShares { node: NodeId, held: Shares, requested: Shares },
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Pool shares, fixed point with 18 decimals like token amounts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shares(pub u128);

impl fmt::Display for Shares {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        TokenAmount::from_atoms(self.0).fmt(f)
    }
}

impl Serialize for Shares {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub performance_score: Rate,
    /// Annual fraction of the outstanding grant returned to the fund as fees.
    pub fee_return_rate: Rate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreasuryState {
    fund: TokenAmount,
    total_shares: Shares,
    share_ledger: BTreeMap<NodeId, Shares>,
    funded_projects: BTreeMap<String, TokenAmount>,
    invested: TokenAmount,
    collected: TokenAmount,
    allocated: TokenAmount,
    redeemed: TokenAmount,
}

impl TreasuryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fund(&self) -> TokenAmount {
        self.fund
    }

    pub fn total_shares(&self) -> Shares {
        self.total_shares
    }

    pub fn shares_of(&self, node: NodeId) -> Shares {
        self.share_ledger.get(&node).copied().unwrap_or_default()
    }

    pub fn holders(&self) -> impl Iterator<Item = (NodeId, Shares)> + '_ {
        self.share_ledger.iter().map(|(k, v)| (*k, *v))
    }

    pub fn outstanding(&self, project: &str) -> Option<TokenAmount> {
        self.funded_projects.get(project).copied()
    }

    pub fn projects(&self) -> impl Iterator<Item = (&str, TokenAmount)> {
        self.funded_projects.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn total_invested(&self) -> TokenAmount {
        self.invested
    }

    pub fn total_collected(&self) -> TokenAmount {
        self.collected
    }

    pub fn total_allocated(&self) -> TokenAmount {
        self.allocated
    }

    pub fn total_redeemed(&self) -> TokenAmount {
        self.redeemed
    }

    /// `fund / total_shares`, or `None` before any shares exist.
    pub fn share_price(&self) -> Option<Rate> {
        if self.total_shares.0 == 0 {
            None
        } else {
            Rate::new(self.fund.atoms(), self.total_shares.0).ok()
        }
    }

    /// Adds `amount` to the fund. The entry fee stays in the fund without
    /// minting shares; the remainder mints shares at the prevailing price
    /// (1:1 when no shares exist).
    pub fn invest(&mut self, node: NodeId, amount: TokenAmount, entry_fee_rate: Rate) -> Result<Shares, TreasuryError> {
        if amount.is_zero() {
            return Err(TreasuryError::ZeroInvestment);
        }
        let fee = amount.mul_rate(entry_fee_rate.min(Rate::ONE))?;
        let net = amount.checked_sub(fee)?;
        let minted = if self.total_shares.0 == 0 {
            net.atoms()
        } else if self.fund.is_zero() {
            return Err(TreasuryError::ZeroSharePrice);
        } else {
            mul_div_floor(net.atoms(), self.total_shares.0, self.fund.atoms())?
        };
        let fund = self.fund.checked_add(amount)?;
        let total = self.total_shares.0.checked_add(minted).ok_or(MathError::Overflow)?;
        let invested = self.invested.checked_add(amount)?;
        self.fund = fund;
        self.total_shares = Shares(total);
        self.invested = invested;
        let held = self.share_ledger.entry(node).or_default();
        held.0 += minted;
        Ok(Shares(minted))
    }

    /// Grants `budget` across projects in proportion to performance score.
    /// Rounding dust stays in the fund.
    pub fn distribute_to_projects(&mut self, projects: &[Project], budget: TokenAmount) -> Result<Vec<(String, TokenAmount)>, TreasuryError> {
        if budget > self.fund {
            return Err(TreasuryError::BudgetExceedsFund { budget, fund: self.fund });
        }
        let mut total_score = Rate::ZERO;
        for p in projects {
            total_score = total_score.checked_add(p.performance_score)?;
        }
        if total_score.is_zero() {
            return Err(TreasuryError::AllScoresZero);
        }
        let mut allocations = Vec::with_capacity(projects.len());
        let mut spent = TokenAmount::ZERO;
        for p in projects {
            let weight = p.performance_score.checked_div(total_score)?;
            let a = budget.mul_rate(weight)?;
            spent = spent.checked_add(a)?;
            allocations.push((p.id.clone(), a));
        }
        self.fund = self.fund.checked_sub(spent)?;
        self.allocated = self.allocated.checked_add(spent)?;
        for (id, a) in &allocations {
            let slot = self.funded_projects.entry(id.clone()).or_default();
            *slot = slot.checked_add(*a)?;
        }
        Ok(allocations)
    }

    /// Fees returned by a funded project; raises the share price.
    pub fn collect_project_fees(&mut self, project: &str, amount: TokenAmount) -> Result<(), TreasuryError> {
        if !self.funded_projects.contains_key(project) {
            return Err(TreasuryError::UnknownProject(project.to_string()));
        }
        self.fund = self.fund.checked_add(amount)?;
        self.collected = self.collected.checked_add(amount)?;
        Ok(())
    }

    /// Burns `shares` of `node` for `floor(shares · fund / total_shares)`.
    pub fn redeem(&mut self, node: NodeId, shares: Shares) -> Result<TokenAmount, TreasuryError> {
        let held = self.shares_of(node);
        if held < shares {
            return Err(TreasuryError::InsufficientShares { node, held, requested: shares });
        }
        if shares.0 == 0 {
            return Ok(TokenAmount::ZERO);
        }
        let payout = TokenAmount::from_atoms(mul_div_floor(shares.0, self.fund.atoms(), self.total_shares.0)?);
        self.fund = self.fund.checked_sub(payout)?;
        self.total_shares = Shares(self.total_shares.0 - shares.0);
        self.redeemed = self.redeemed.checked_add(payout)?;
        let remaining = held.0 - shares.0;
        if remaining == 0 {
            self.share_ledger.remove(&node);
        } else {
            self.share_ledger.insert(node, Shares(remaining));
        }
        Ok(payout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: u128) -> TokenAmount {
        TokenAmount::from_tokens(n)
    }

    fn project(id: &str, score: u128) -> Project {
        Project { id: id.into(), performance_score: Rate::integer(score), fee_return_rate: Rate::ZERO }
    }

    #[test]
    fn invest_examples() {
        let mut tr = TreasuryState::new();
        let s = tr.invest(NodeId(1), t(1_000), Rate::percent(10)).unwrap();
        assert_eq!(s, Shares(t(900).atoms()));
        assert_eq!(tr.fund(), t(1_000));
        assert_eq!(tr.invest(NodeId(1), TokenAmount::ZERO, Rate::ZERO), Err(TreasuryError::ZeroInvestment));
        let mut tr = TreasuryState::new();
        assert_eq!(tr.invest(NodeId(2), t(5), Rate::ZERO).unwrap(), Shares(t(5).atoms()));
    }

    #[test]
    fn project_distribution_examples() {
        let mut tr = TreasuryState::new();
        tr.invest(NodeId(1), t(1_000), Rate::ZERO).unwrap();
        let a = tr.distribute_to_projects(&[project("a", 1), project("b", 1)], t(100)).unwrap();
        assert_eq!(a, vec![("a".to_string(), t(50)), ("b".to_string(), t(50))]);
        let a = tr.distribute_to_projects(&[project("a", 3), project("b", 1)], t(100)).unwrap();
        assert_eq!(a[0].1, t(75));
        assert_eq!(a[1].1, t(25));
        assert_eq!(tr.fund(), t(800));
        assert_eq!(tr.outstanding("a"), Some(t(125)));
        assert!(matches!(
            tr.distribute_to_projects(&[project("a", 1)], t(801)),
            Err(TreasuryError::BudgetExceedsFund { .. })
        ));
        assert_eq!(tr.distribute_to_projects(&[project("a", 0)], t(1)), Err(TreasuryError::AllScoresZero));
    }

    #[test]
    fn distribution_dust_stays_in_fund() {
        let mut tr = TreasuryState::new();
        tr.invest(NodeId(1), TokenAmount::from_atoms(100), Rate::ZERO).unwrap();
        let ps = [project("a", 1), project("b", 1), project("c", 1)];
        tr.distribute_to_projects(&ps, TokenAmount::from_atoms(10)).unwrap();
        assert_eq!(tr.fund().atoms(), 91);
    }

    #[test]
    fn collect_raises_price() {
        let mut tr2 = TreasuryState::new();
        tr2.invest(NodeId(1), t(900), Rate::ZERO).unwrap();
        tr2.distribute_to_projects(&[project("p", 1)], TokenAmount::ZERO).unwrap();
        tr2.collect_project_fees("p", t(90)).unwrap();
        assert_eq!(tr2.share_price().unwrap(), Rate::new(11, 10).unwrap());
        let before = tr2.clone();
        tr2.collect_project_fees("p", TokenAmount::ZERO).unwrap();
        assert_eq!(before, tr2);
        assert_eq!(tr2.collect_project_fees("zz", t(1)), Err(TreasuryError::UnknownProject("zz".into())));
    }

    #[test]
    fn redeem_examples() {
        let mut tr = TreasuryState::new();
        tr.invest(NodeId(1), t(1_000), Rate::percent(10)).unwrap();
        let all = tr.shares_of(NodeId(1));
        assert_eq!(tr.redeem(NodeId(1), all).unwrap(), t(1_000));
        assert_eq!(tr.fund(), TokenAmount::ZERO);

        let mut tr = TreasuryState::new();
        tr.invest(NodeId(1), t(1_000), Rate::ZERO).unwrap();
        tr.distribute_to_projects(&[project("p", 1)], TokenAmount::ZERO).unwrap();
        tr.collect_project_fees("p", t(100)).unwrap();
        assert_eq!(tr.redeem(NodeId(1), Shares(t(100).atoms())).unwrap(), t(110));
        assert!(matches!(
            tr.redeem(NodeId(1), Shares(t(10_000).atoms())),
            Err(TreasuryError::InsufficientShares { .. })
        ));
        assert!(matches!(tr.redeem(NodeId(2), Shares(1)), Err(TreasuryError::InsufficientShares { .. })));
    }

    #[test]
    fn zero_price_blocks_investment() {
        let mut tr = TreasuryState::new();
        tr.invest(NodeId(1), t(10), Rate::ZERO).unwrap();
        tr.distribute_to_projects(&[project("p", 1)], t(10)).unwrap();
        assert_eq!(tr.invest(NodeId(2), t(1), Rate::ZERO), Err(TreasuryError::ZeroSharePrice));
    }
}
