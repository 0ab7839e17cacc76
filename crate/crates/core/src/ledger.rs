//! Masternode registry: stake accounting, loyalty-weighted pool payouts,
//! block-producer selection and standby activation.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::math::{mul_div_floor, MathError};

pub const DEFAULT_MIN_STAKE: TokenAmount = TokenAmount::from_tokens(10_000_000);
pub const DEFAULT_MAX_VALIDATORS: usize = 108;
pub const MAX_LOYALTY_FACTOR: u32 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("stake {stake} is below the minimum {minimum}")]
    BelowMinimumStake { stake: TokenAmount, minimum: TokenAmount },
    #[error("validator set is full ({0} validators)")]
    ValidatorSetFull(usize),
    #[error("lock duration must be at least one year")]
    ZeroLockDuration,
    #[error("availability must be within [0, 1], got {0}")]
    InvalidAvailability(f64),
    #[error("no nodes to distribute to")]
    EmptyNodeSet,
    #[error("no validator or standby available to produce")]
    NoNodeAvailable,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a validator")]
    NotValidator(NodeId),
    #[error(transparent)]
    Math(#[from] MathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Validator,
    Standby,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Validator => "validator",
            Role::Standby => "standby",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Masternode {
    pub id: NodeId,
    pub role: Role,
    pub stake: TokenAmount,
    pub lock_years: u32,
    pub joined_at: u64,
    /// Probability of being online for any given block.
    pub availability: f64,
}

impl Masternode {
    pub fn is_available<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        if self.availability >= 1.0 {
            true
        } else if self.availability <= 0.0 {
            false
        } else {
            rng.random_bool(self.availability)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    RoundRobin,
    /// Each staked atom is one ticket.
    StakeLottery,
}

#[derive(Debug, Clone)]
pub struct LedgerState {
    nodes: Vec<Masternode>,
    validators: Vec<usize>,
    standbys: Vec<usize>,
    total_staked: TokenAmount,
    /// Undistributed remainder of proportional payouts, carried to the next epoch.
    pub epoch_dust: TokenAmount,
    min_stake: TokenAmount,
    max_validators: usize,
}

impl Default for LedgerState {
    fn default() -> Self {
        LedgerState::new(DEFAULT_MIN_STAKE, DEFAULT_MAX_VALIDATORS)
    }
}

impl LedgerState {
    pub fn new(min_stake: TokenAmount, max_validators: usize) -> Self {
        LedgerState {
            nodes: Vec::new(),
            validators: Vec::new(),
            standbys: Vec::new(),
            total_staked: TokenAmount::ZERO,
            epoch_dust: TokenAmount::ZERO,
            min_stake,
            max_validators,
        }
    }

    pub fn register_node(&mut self, stake: TokenAmount, role: Role, lock_years: u32) -> Result<NodeId, LedgerError> {
        self.register_with(stake, role, lock_years, 1.0, 0)
    }

    pub fn register_with(
        &mut self,
        stake: TokenAmount,
        role: Role,
        lock_years: u32,
        availability: f64,
        joined_at: u64,
    ) -> Result<NodeId, LedgerError> {
        if stake < self.min_stake {
            return Err(LedgerError::BelowMinimumStake { stake, minimum: self.min_stake });
        }
        if lock_years == 0 {
            return Err(LedgerError::ZeroLockDuration);
        }
        if !(0.0..=1.0).contains(&availability) {
            return Err(LedgerError::InvalidAvailability(availability));
        }
        if role == Role::Validator && self.validators.len() >= self.max_validators {
            return Err(LedgerError::ValidatorSetFull(self.max_validators));
        }
        let total_staked = self.total_staked.checked_add(stake)?;
        let id = NodeId(self.nodes.len() as u32 + 1);
        let idx = self.nodes.len();
        self.nodes.push(Masternode { id, role, stake, lock_years, joined_at, availability });
        match role {
            Role::Validator => self.validators.push(idx),
            Role::Standby => self.standbys.push(idx),
        }
        self.total_staked = total_staked;
        Ok(id)
    }

    /// Removes up to `amount` from a node's stake; returns what was taken.
    pub fn slash(&mut self, id: NodeId, amount: TokenAmount) -> Result<TokenAmount, LedgerError> {
        let idx = self.index(id)?;
        let node = &mut self.nodes[idx];
        let taken = amount.min(node.stake);
        node.stake = node.stake.checked_sub(taken)?;
        self.total_staked = self.total_staked.checked_sub(taken)?;
        Ok(taken)
    }

    fn index(&self, id: NodeId) -> Result<usize, LedgerError> {
        let idx = (id.0 as usize).checked_sub(1).ok_or(LedgerError::UnknownNode(id))?;
        if idx < self.nodes.len() {
            Ok(idx)
        } else {
            Err(LedgerError::UnknownNode(id))
        }
    }

    pub fn node(&self, id: NodeId) -> Result<&Masternode, LedgerError> {
        Ok(&self.nodes[self.index(id)?])
    }

    pub fn nodes(&self) -> &[Masternode] {
        &self.nodes
    }

    /// Validators in registration order.
    pub fn validators(&self) -> impl Iterator<Item = &Masternode> {
        self.validators.iter().map(|&i| &self.nodes[i])
    }

    /// Standbys in registration order.
    pub fn standbys(&self) -> impl Iterator<Item = &Masternode> {
        self.standbys.iter().map(|&i| &self.nodes[i])
    }

    pub fn validator_count(&self) -> usize {
        self.validators.len()
    }

    pub fn standby_count(&self) -> usize {
        self.standbys.len()
    }

    pub fn total_staked(&self) -> TokenAmount {
        self.total_staked
    }

    /// Distributes `pool` plus carried dust by loyalty factor and stores the
    /// new remainder in `epoch_dust`.
    pub fn distribute_loyalty(&mut self, pool: TokenAmount, include_standby: bool) -> Result<LoyaltyPayout, LedgerError> {
        let total = pool.checked_add(self.epoch_dust)?;
        let nodes: Vec<Masternode> = self
            .nodes
            .iter()
            .filter(|n| include_standby || n.role == Role::Validator)
            .cloned()
            .collect();
        let payout = distribute_loyalty_pool(total, &nodes)?;
        self.epoch_dust = payout.dust;
        Ok(payout)
    }
}

/// Loyalty factor for a stake locked `lock_years`: equal to the duration,
/// capped at 10.
pub fn loyalty_factor(lock_years: u32) -> Result<u32, LedgerError> {
    if lock_years == 0 {
        return Err(LedgerError::ZeroLockDuration);
    }
    Ok(lock_years.min(MAX_LOYALTY_FACTOR))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoyaltyPayout {
    pub allocations: Vec<(NodeId, TokenAmount)>,
    pub dust: TokenAmount,
}

/// `floor(pool · L_i / ΣL)` per node; the remainder is returned as dust.
pub fn distribute_loyalty_pool(pool: TokenAmount, nodes: &[Masternode]) -> Result<LoyaltyPayout, LedgerError> {
    if nodes.is_empty() {
        return Err(LedgerError::EmptyNodeSet);
    }
    let factors = nodes
        .iter()
        .map(|n| loyalty_factor(n.lock_years))
        .collect::<Result<Vec<_>, _>>()?;
    let sum: u128 = factors.iter().map(|&f| f as u128).sum();
    let mut paid = TokenAmount::ZERO;
    let mut allocations = Vec::with_capacity(nodes.len());
    for (node, &f) in nodes.iter().zip(&factors) {
        let share = TokenAmount::from_atoms(mul_div_floor(pool.atoms(), f as u128, sum)?);
        paid = paid.checked_add(share)?;
        allocations.push((node.id, share));
    }
    Ok(LoyaltyPayout { allocations, dust: pool.checked_sub(paid)? })
}

/// The node owning the slot at `height`, ignoring availability.
pub fn scheduled_producer<R: Rng + ?Sized>(
    ledger: &LedgerState,
    height: u64,
    policy: SelectionPolicy,
    rng: &mut R,
) -> Result<NodeId, LedgerError> {
    let n = ledger.validators.len();
    if n == 0 {
        return Err(LedgerError::NoNodeAvailable);
    }
    match policy {
        SelectionPolicy::RoundRobin => Ok(ledger.nodes[ledger.validators[(height % n as u64) as usize]].id),
        SelectionPolicy::StakeLottery => {
            let candidates: Vec<&Masternode> = ledger.validators().collect();
            weighted_draw(&candidates, rng).ok_or(LedgerError::NoNodeAvailable)
        }
    }
}

fn weighted_draw<R: Rng + ?Sized>(candidates: &[&Masternode], rng: &mut R) -> Option<NodeId> {
    let total: u128 = candidates.iter().map(|n| n.stake.atoms()).sum();
    if total == 0 {
        return None;
    }
    let mut ticket = rng.random_range(0..total);
    for n in candidates {
        let w = n.stake.atoms();
        if ticket < w {
            return Some(n.id);
        }
        ticket -= w;
    }
    None
}

/// Picks an online producer for `height`.
///
/// Round robin starts at `height mod n` and skips offline validators; the
/// stake lottery draws among validators found online. With no validator
/// online the first available standby is used.
pub fn select_producer<R: Rng + ?Sized>(
    ledger: &LedgerState,
    height: u64,
    policy: SelectionPolicy,
    rng: &mut R,
) -> Result<NodeId, LedgerError> {
    let n = ledger.validators.len();
    let chosen = match policy {
        SelectionPolicy::RoundRobin => {
            let start = if n == 0 { 0 } else { (height % n as u64) as usize };
            (0..n)
                .map(|k| &ledger.nodes[ledger.validators[(start + k) % n]])
                .find(|node| node.is_available(rng))
                .map(|node| node.id)
        }
        SelectionPolicy::StakeLottery => {
            let online: Vec<&Masternode> = ledger.validators().filter(|v| v.is_available(rng)).collect();
            weighted_draw(&online, rng)
        }
    };
    match chosen {
        Some(id) => Ok(id),
        None => first_available_standby(ledger, rng).ok_or(LedgerError::NoNodeAvailable),
    }
}

fn first_available_standby<R: Rng + ?Sized>(ledger: &LedgerState, rng: &mut R) -> Option<NodeId> {
    ledger.standbys().find(|s| s.is_available(rng)).map(|s| s.id)
}

/// Standby that produces in place of the unavailable validator `failed` for
/// this block only: the first available one in registration order.
pub fn promote_standby<R: Rng + ?Sized>(
    ledger: &LedgerState,
    failed: NodeId,
    _height: u64,
    rng: &mut R,
) -> Result<Option<NodeId>, LedgerError> {
    if ledger.node(failed)?.role != Role::Validator {
        return Err(LedgerError::NotValidator(failed));
    }
    Ok(first_available_standby(ledger, rng))
}
