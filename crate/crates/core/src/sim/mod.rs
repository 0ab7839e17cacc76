//! Deterministic simulation loop.
//!
//! A run advances either block by block ([`SimState::step`]) or one epoch at
//! a time with aggregated traffic ([`SimState::advance_epoch`]). Both settle
//! rewards, penalties, escrow and treasury flows at epoch boundaries, and
//! both mint staking rewards from the same cumulative formula
//! `floor(stake · rate · elapsed / blocks_per_year)`, so the two granularities
//! mint identical totals.
//!
//! Token holdings are tracked in full: node balances, pending income,
//! stakes, escrow, the treasury fund, undistributed fees and an `external`
//! bucket for everyone else (transaction senders, funded projects). Their sum
//! always equals `initial + minted - burned`; [`SimState::audit`] checks it.

pub mod config;
pub mod report;
pub mod traffic;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde_json::Value;
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::escrow::{withdrawal_fee, EscrowAccount, EscrowError, WithdrawalFeeTable};
use crate::fee_market::{
    effective_multiplier, next_base_fee, order_by_tip, split_fee, tip_active, FeeMarketError, FeeMarketState,
    Transaction,
};
use crate::ledger::{promote_standby, scheduled_producer, LedgerError, LedgerState, NodeId, Role, SelectionPolicy};
use crate::math::{mul_div_floor, MathError};
use crate::rate::{Rate, RateError};
use crate::rewards::{EarningsBreakdown, FeeDisposition, RewardError};
use crate::treasury::{TreasuryError, TreasuryState};

use config::{ConfigError, FeeSharePolicy, Granularity, ScenarioConfig, TipPolicy};
use report::{compute_metrics, EpochRow, MetricsError, NodeReport, SchemeInfo, SimulationReport, Summary};
use traffic::{midpoint_tip, TrafficGenerator};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    FeeMarket(#[from] FeeMarketError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Escrow(#[from] EscrowError),
    #[error(transparent)]
    Treasury(#[from] TreasuryError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("supply audit failed at height {height}: {detail}")]
    Audit { height: u64, detail: String },
    #[error("the run has already reached its duration")]
    Finished,
    #[error("the run has not reached its duration")]
    NotFinished,
}

/// Cumulative flow counters; epoch rows are differences of two snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub minted: TokenAmount,
    pub burned: TokenAmount,
    pub fee_burned: TokenAmount,
    pub penalty_burned: TokenAmount,
    pub escrow_burned: TokenAmount,
    pub fees_charged: TokenAmount,
    pub tips: TokenAmount,
    pub tx_included: u64,
    pub tx_dropped: u64,
    pub blocks_produced: u64,
    pub blocks_by_standby: u64,
    pub blocks_skipped: u64,
}

impl Totals {
    fn since(&self, earlier: &Totals) -> Totals {
        let d = |a: TokenAmount, b: TokenAmount| a.saturating_sub(b);
        Totals {
            minted: d(self.minted, earlier.minted),
            burned: d(self.burned, earlier.burned),
            fee_burned: d(self.fee_burned, earlier.fee_burned),
            penalty_burned: d(self.penalty_burned, earlier.penalty_burned),
            escrow_burned: d(self.escrow_burned, earlier.escrow_burned),
            fees_charged: d(self.fees_charged, earlier.fees_charged),
            tips: d(self.tips, earlier.tips),
            tx_included: self.tx_included - earlier.tx_included,
            tx_dropped: self.tx_dropped - earlier.tx_dropped,
            blocks_produced: self.blocks_produced - earlier.blocks_produced,
            blocks_by_standby: self.blocks_by_standby - earlier.blocks_by_standby,
            blocks_skipped: self.blocks_skipped - earlier.blocks_skipped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BurnKind {
    Fee,
    Penalty,
    Escrow,
}

/// Per-node accumulators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeAccount {
    pub initial_stake: TokenAmount,
    pub staking_reward: TokenAmount,
    pub fee_income: TokenAmount,
    pub tips: TokenAmount,
    pub penalties: TokenAmount,
    pub stake_slashed: TokenAmount,
    pub treasury_invested: TokenAmount,
    pub treasury_redeemed: TokenAmount,
    pub liquid: TokenAmount,
    pub blocks_produced: u64,
    pub slots_missed: u64,
    pending_fees: TokenAmount,
    pending_tips: TokenAmount,
    pending_penalty: TokenAmount,
    anchor_height: u64,
    anchor_stake: TokenAmount,
    reward_at_anchor: TokenAmount,
}

impl NodeAccount {
    pub fn gross(&self) -> TokenAmount {
        self.staking_reward.checked_add(self.fee_income).and_then(|x| x.checked_add(self.tips)).expect("bounded by supply")
    }

    /// Income credited this epoch but not yet settled.
    pub fn pending(&self) -> TokenAmount {
        self.pending_fees.checked_add(self.pending_tips).expect("bounded by supply")
    }
}

/// Pricing context of one block.
#[derive(Debug, Clone, Copy)]
struct BlockEnv {
    tps: Rate,
    multiplier: u64,
    tips_on: bool,
}

#[derive(Debug, Clone)]
pub struct SimState {
    cfg: ScenarioConfig,
    pub height: u64,
    pub total_supply: TokenAmount,
    pub totals: Totals,
    pub ledger: LedgerState,
    pub fee_market: FeeMarketState,
    pub escrow: Vec<EscrowAccount>,
    pub treasury: TreasuryState,
    pub accounts: Vec<NodeAccount>,
    /// Tokens held outside the simulated nodes and treasury.
    pub external: TokenAmount,
    /// Fees awaiting distribution, including rounding remainders.
    pub fee_pool: TokenAmount,
    mempool: VecDeque<Transaction>,
    backlog: u64,
    traffic: TrafficGenerator,
    rng: ChaCha8Rng,
    escrow_table: WithdrawalFeeTable,
    blocks_per_day: u64,
    blocks_per_year: u64,
    blocks_per_epoch: u64,
    loyalty_released: TokenAmount,
    last_settled: u64,
    epoch_start: Totals,
    last_env: Option<BlockEnv>,
    history: Vec<EpochRow>,
    redeemed: bool,
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid probability").sample(rng)
    }
}

fn idx(id: NodeId) -> usize {
    id.0 as usize - 1
}

impl SimState {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let sim = &cfg.simulation;
        let mut ledger = LedgerState::new(cfg.min_stake, cfg.max_validators as usize);
        for g in &cfg.nodes {
            for _ in 0..g.count {
                ledger.register_with(g.stake, g.role, g.lock_years, g.availability, 0)?;
            }
        }
        let accounts = ledger
            .nodes()
            .iter()
            .map(|n| NodeAccount { initial_stake: n.stake, anchor_stake: n.stake, ..Default::default() })
            .collect();
        let escrow = ledger.nodes().iter().map(|n| EscrowAccount::new(n.id)).collect();
        let external = cfg.network.total_supply.checked_sub(ledger.total_staked())?;
        let fm = &cfg.fee_market;
        let fee_market = FeeMarketState::new(fm.initial_base_fee, fm.gas_target, fm.tiers.clone(), fm.tip)?
            .with_min_base_fee(fm.min_base_fee)?;
        Ok(SimState {
            height: 0,
            total_supply: cfg.network.total_supply,
            totals: Totals::default(),
            ledger,
            fee_market,
            escrow,
            treasury: TreasuryState::new(),
            accounts,
            external,
            fee_pool: TokenAmount::ZERO,
            mempool: VecDeque::new(),
            backlog: 0,
            traffic: TrafficGenerator::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            escrow_table: cfg.escrow.fee_table(sim.blocks_per_day()),
            blocks_per_day: sim.blocks_per_day(),
            blocks_per_year: sim.blocks_per_year(),
            blocks_per_epoch: sim.blocks_per_epoch(),
            loyalty_released: TokenAmount::ZERO,
            last_settled: 0,
            epoch_start: Totals::default(),
            last_env: None,
            history: Vec::new(),
            redeemed: false,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn history(&self) -> &[EpochRow] {
        &self.history
    }

    pub fn duration(&self) -> u64 {
        self.cfg.simulation.duration_blocks
    }

    pub fn is_finished(&self) -> bool {
        self.height >= self.duration()
    }

    pub fn mempool_len(&self) -> u64 {
        self.mempool.len() as u64 + self.backlog
    }

    fn at_boundary(&self, h: u64) -> bool {
        h.is_multiple_of(self.blocks_per_epoch) || h == self.duration()
    }

    fn mint(&mut self, amount: TokenAmount) -> Result<(), SimError> {
        self.total_supply = self.total_supply.checked_add(amount)?;
        self.totals.minted = self.totals.minted.checked_add(amount)?;
        Ok(())
    }

    fn burn(&mut self, kind: BurnKind, amount: TokenAmount) -> Result<(), SimError> {
        self.total_supply = self.total_supply.checked_sub(amount)?;
        self.totals.burned = self.totals.burned.checked_add(amount)?;
        let slot = match kind {
            BurnKind::Fee => &mut self.totals.fee_burned,
            BurnKind::Penalty => &mut self.totals.penalty_burned,
            BurnKind::Escrow => &mut self.totals.escrow_burned,
        };
        *slot = slot.checked_add(amount)?;
        Ok(())
    }

    fn env(&self, h: u64) -> Result<BlockEnv, SimError> {
        let t = &self.cfg.traffic;
        let fm = &self.cfg.fee_market;
        let tps = t.tps_at(h / self.blocks_per_day);
        let ratio = tps.checked_div(t.reference_tps)?;
        let multiplier = fm.multiplier_override.unwrap_or_else(|| effective_multiplier(ratio, &fm.tiers, fm.tip_mode));
        let tips_on = match fm.tips {
            TipPolicy::Tiered => tip_active(ratio, &fm.tiers),
            TipPolicy::Always => true,
            TipPolicy::Never => false,
        };
        Ok(BlockEnv { tps, multiplier, tips_on })
    }

    fn penalize_missed(&mut self, i: usize, slots: u64) -> Result<(), SimError> {
        if slots == 0 {
            return Ok(());
        }
        let acct = &mut self.accounts[i];
        acct.slots_missed += slots;
        let rate = self.cfg.faults.inactivity_penalty_rate;
        if !rate.is_zero() {
            let per_slot = self.ledger.nodes()[i].stake.mul_rate(rate)?;
            acct.pending_penalty = acct.pending_penalty.checked_add(per_slot.checked_mul(slots as u128)?)?;
        }
        Ok(())
    }

    /// Producer of block `h`: the scheduled validator if online, else the
    /// first online standby, else `None` (the slot is skipped).
    fn pick_producer(&mut self, h: u64) -> Result<Option<(usize, bool)>, SimError> {
        let sched = scheduled_producer(&self.ledger, h, self.cfg.simulation.selection, &mut self.rng)?;
        if self.ledger.node(sched)?.is_available(&mut self.rng) {
            return Ok(Some((idx(sched), false)));
        }
        self.penalize_missed(idx(sched), 1)?;
        Ok(promote_standby(&self.ledger, sched, h, &mut self.rng)?.map(|s| (idx(s), true)))
    }

    /// Charges `base_part` and `tips` to external holders and routes them.
    fn charge(&mut self, producer: usize, base_part: TokenAmount, tips: TokenAmount) -> Result<(), SimError> {
        let total = base_part.checked_add(tips)?;
        self.external = self.external.checked_sub(total)?;
        self.totals.fees_charged = self.totals.fees_charged.checked_add(total)?;
        self.totals.tips = self.totals.tips.checked_add(tips)?;
        match self.cfg.scheme.fee_disposition {
            FeeDisposition::Burn => self.burn(BurnKind::Fee, base_part)?,
            FeeDisposition::Distribute => match self.cfg.fee_share {
                FeeSharePolicy::Pooled => self.fee_pool = self.fee_pool.checked_add(base_part)?,
                FeeSharePolicy::Producer => {
                    let a = &mut self.accounts[producer];
                    a.pending_fees = a.pending_fees.checked_add(base_part)?;
                    a.fee_income = a.fee_income.checked_add(base_part)?;
                }
            },
        }
        let a = &mut self.accounts[producer];
        a.pending_tips = a.pending_tips.checked_add(tips)?;
        a.tips = a.tips.checked_add(tips)?;
        Ok(())
    }

    /// Simulates one block.
    pub fn step(&mut self) -> Result<(), SimError> {
        if self.is_finished() {
            return Err(SimError::Finished);
        }
        let h = self.height;
        let env = self.env(h)?;
        let tip_cfg = self.cfg.fee_market.tip;
        let txs = self.traffic.next_block(
            &self.cfg.traffic,
            env.tips_on.then_some(&tip_cfg),
            &mut self.rng,
            self.cfg.simulation.block_time_seconds,
            h,
            h / self.blocks_per_day,
        );
        let cap = self.cfg.traffic.mempool_cap;
        for tx in txs {
            if self.mempool.len() as u64 >= cap {
                self.totals.tx_dropped += 1;
            } else {
                self.mempool.push_back(tx);
            }
        }

        match self.pick_producer(h)? {
            None => self.totals.blocks_skipped += 1,
            Some((p, by_standby)) => {
                let block = self.take_block(env.tips_on);
                let mut gas = 0u64;
                let mut base_part = TokenAmount::ZERO;
                let mut tips = TokenAmount::ZERO;
                for tx in &block {
                    let split = split_fee(tx, self.fee_market.base_fee, env.multiplier)?;
                    base_part = base_part.checked_add(split.burned)?;
                    tips = tips.checked_add(split.to_validator)?;
                    gas += tx.gas_used;
                }
                self.charge(p, base_part, tips)?;
                self.totals.tx_included += block.len() as u64;
                self.totals.blocks_produced += 1;
                if by_standby {
                    self.totals.blocks_by_standby += 1;
                }
                self.accounts[p].blocks_produced += 1;
                if self.cfg.fee_market.dynamic_base_fee {
                    self.fee_market.base_fee = next_base_fee(&self.fee_market, gas)?;
                }
            }
        }
        self.last_env = Some(env);
        self.height += 1;
        if self.at_boundary(self.height) {
            self.settle()?;
        }
        Ok(())
    }

    /// Pending transactions that fit in one block, highest tips first when
    /// tips are active.
    fn take_block(&mut self, tips_on: bool) -> Vec<Transaction> {
        let gas_limit = self.fee_market.gas_limit;
        let per_tx = self.cfg.traffic.avg_gas_per_tx;
        let capacity = (gas_limit / per_tx) as usize;
        if self.mempool.len() <= capacity {
            return self.mempool.drain(..).collect();
        }
        if tips_on {
            let mut ordered = order_by_tip(self.mempool.drain(..).collect());
            let rest = ordered.split_off(capacity);
            self.mempool.extend(rest);
            ordered
        } else {
            self.mempool.drain(..capacity).collect()
        }
    }

    /// Simulates up to the next epoch boundary with aggregated traffic.
    pub fn advance_epoch(&mut self) -> Result<(), SimError> {
        if self.is_finished() {
            return Err(SimError::Finished);
        }
        let next = (self.height / self.blocks_per_epoch + 1) * self.blocks_per_epoch;
        let end = next.min(self.duration());
        while self.height < end {
            let day_end = ((self.height / self.blocks_per_day + 1) * self.blocks_per_day).min(end);
            self.aggregate_chunk(day_end - self.height)?;
            self.height = day_end;
        }
        self.settle()
    }

    /// Blocks `[height, height + n)` under constant traffic: producer slot
    /// counts, arrivals, inclusion and the base-fee path in closed form
    /// where possible.
    fn aggregate_chunk(&mut self, n: u64) -> Result<(), SimError> {
        let h0 = self.height;
        let env = self.env(h0)?;
        let nodes = self.ledger.nodes().to_vec();
        let validators: Vec<usize> = self.ledger.validators().map(|v| idx(v.id)).collect();
        let standbys: Vec<usize> = self.ledger.standbys().map(|s| idx(s.id)).collect();
        let v = validators.len() as u64;

        let mut slots = vec![0u64; validators.len()];
        match self.cfg.simulation.selection {
            SelectionPolicy::RoundRobin => {
                let (full, rem, start) = (n / v, n % v, h0 % v);
                for (k, s) in slots.iter_mut().enumerate() {
                    let offset = (k as u64 + v - start) % v;
                    *s = full + u64::from(offset < rem);
                }
            }
            SelectionPolicy::StakeLottery => {
                let mut remaining = n;
                let mut weight: f64 = validators.iter().map(|&i| nodes[i].stake.to_f64()).sum();
                for (k, &i) in validators.iter().enumerate() {
                    let w = nodes[i].stake.to_f64();
                    let take = if k + 1 == validators.len() { remaining } else { binomial(&mut self.rng, remaining, w / weight) };
                    slots[k] = take;
                    remaining -= take;
                    weight -= w;
                }
            }
        }

        let mut produced = vec![0u64; nodes.len()];
        let mut missed_total = 0;
        for (k, &i) in validators.iter().enumerate() {
            let missed = binomial(&mut self.rng, slots[k], 1.0 - nodes[i].availability);
            produced[i] += slots[k] - missed;
            missed_total += missed;
            self.penalize_missed(i, missed)?;
        }
        let mut unfilled = missed_total;
        for &s in &standbys {
            let take = binomial(&mut self.rng, unfilled, nodes[s].availability);
            produced[s] += take;
            unfilled -= take;
            self.totals.blocks_by_standby += take;
        }
        let p_total = n - unfilled;
        self.totals.blocks_skipped += unfilled;
        self.totals.blocks_produced += p_total;
        for (a, &p) in self.accounts.iter_mut().zip(&produced) {
            a.blocks_produced += p;
        }

        // traffic and inclusion
        let t = &self.cfg.traffic;
        let arrivals = self.traffic.arrivals(&mut self.rng, t.arrivals, env.tps, self.cfg.simulation.block_time_seconds, n);
        self.traffic.skip_ids(arrivals);
        let per_block = self.fee_market.gas_limit / t.avg_gas_per_tx;
        let pending = self.backlog + self.mempool.len() as u64 + arrivals;
        self.mempool.clear();
        let included = pending.min(p_total.saturating_mul(per_block));
        let waiting = pending - included;
        let dropped = waiting.saturating_sub(t.mempool_cap);
        self.backlog = waiting - dropped;
        self.totals.tx_dropped += dropped;
        self.totals.tx_included += included;

        // base fee path: the first `r` blocks carry one extra transaction
        let mut base_part = TokenAmount::ZERO;
        if let Some(q) = included.checked_div(p_total) {
            let gas = t.avg_gas_per_tx;
            let r = included % p_total;
            for (count, txs) in [(r, q + 1), (p_total - r, q)] {
                base_part = base_part.checked_add(self.run_blocks(count, txs * gas, env.multiplier)?)?;
            }
        }
        let tips = if env.tips_on {
            midpoint_tip(&self.cfg.fee_market.tip).checked_mul(included as u128)?
        } else {
            TokenAmount::ZERO
        };
        self.charge_aggregate(&produced, p_total, base_part, tips)?;
        self.last_env = Some(env);
        Ok(())
    }

    /// Runs `count` produced blocks of `gas` each through the base-fee
    /// update and returns the base-fee charges. Stops iterating once the
    /// fee reaches a fixed point.
    fn run_blocks(&mut self, count: u64, gas: u64, multiplier: u64) -> Result<TokenAmount, SimError> {
        let mut total = TokenAmount::ZERO;
        let per_gas = |base: TokenAmount| base.checked_mul(multiplier as u128).and_then(|x| x.checked_mul(gas as u128));
        for k in 0..count {
            let base = self.fee_market.base_fee;
            let charge = per_gas(base)?;
            if !self.cfg.fee_market.dynamic_base_fee {
                return Ok(total.checked_add(charge.checked_mul((count - k) as u128)?)?);
            }
            total = total.checked_add(charge)?;
            let next = next_base_fee(&self.fee_market, gas)?;
            if next == base {
                return Ok(total.checked_add(charge.checked_mul((count - k - 1) as u128)?)?);
            }
            self.fee_market.base_fee = next;
        }
        Ok(total)
    }

    /// Routes aggregated fees in proportion to blocks produced; remainders
    /// wait in the fee pool.
    fn charge_aggregate(&mut self, produced: &[u64], p_total: u64, base_part: TokenAmount, tips: TokenAmount) -> Result<(), SimError> {
        let total = base_part.checked_add(tips)?;
        if total.is_zero() {
            return Ok(());
        }
        self.external = self.external.checked_sub(total)?;
        self.totals.fees_charged = self.totals.fees_charged.checked_add(total)?;
        self.totals.tips = self.totals.tips.checked_add(tips)?;
        let mut to_producers = TokenAmount::ZERO;
        match self.cfg.scheme.fee_disposition {
            FeeDisposition::Burn => self.burn(BurnKind::Fee, base_part)?,
            FeeDisposition::Distribute => match self.cfg.fee_share {
                FeeSharePolicy::Pooled => self.fee_pool = self.fee_pool.checked_add(base_part)?,
                FeeSharePolicy::Producer => to_producers = base_part,
            },
        }
        // earlier remainders ride along unless the pool is paid out at settlement
        let pooled = !self.cfg.scheme.burns_fees() && self.cfg.fee_share == FeeSharePolicy::Pooled;
        let carry = if pooled { TokenAmount::ZERO } else { std::mem::take(&mut self.fee_pool) };
        let (fee_base, tip_base) = if self.cfg.scheme.burns_fees() {
            (to_producers, tips.checked_add(carry)?)
        } else {
            (to_producers.checked_add(carry)?, tips)
        };
        let mut paid = TokenAmount::ZERO;
        for (i, &p) in produced.iter().enumerate() {
            if p == 0 {
                continue;
            }
            let f = fee_base.mul_div(p as u128, p_total as u128)?;
            let t = tip_base.mul_div(p as u128, p_total as u128)?;
            let a = &mut self.accounts[i];
            a.pending_fees = a.pending_fees.checked_add(f)?;
            a.fee_income = a.fee_income.checked_add(f)?;
            a.pending_tips = a.pending_tips.checked_add(t)?;
            a.tips = a.tips.checked_add(t)?;
            paid = paid.checked_add(f)?.checked_add(t)?;
        }
        let dust = fee_base.checked_add(tip_base)?.checked_sub(paid)?;
        self.fee_pool = self.fee_pool.checked_add(dust)?;
        Ok(())
    }

    fn entry_fee(&self, amount: TokenAmount) -> Result<Rate, SimError> {
        if let Some(r) = self.cfg.treasury.entry_fee_rate {
            return Ok(r);
        }
        match withdrawal_fee(amount, Rate::ZERO, &self.escrow_table) {
            Ok(r) => Ok(r),
            Err(EscrowError::BelowThreshold { .. }) => Ok(self.escrow_table.tiers()[0].fee_rate),
            Err(e) => Err(e.into()),
        }
    }

    /// Staking reward due to node `i` at height `h` and not yet paid.
    fn reward_due(&self, i: usize, h: u64) -> Result<TokenAmount, SimError> {
        let a = &self.accounts[i];
        let rate = match self.ledger.nodes()[i].role {
            Role::Validator => self.cfg.scheme.validator_rate,
            Role::Standby => self.cfg.scheme.standby_rate,
        };
        let elapsed = (h - a.anchor_height) as u128;
        let num = rate.numer().checked_mul(elapsed).ok_or(MathError::Overflow)?;
        let den = rate.denom().checked_mul(self.blocks_per_year as u128).ok_or(MathError::Overflow)?;
        let since_anchor = TokenAmount::from_atoms(mul_div_floor(a.anchor_stake.atoms(), num, den)?);
        Ok(a.reward_at_anchor.checked_add(since_anchor)?.checked_sub(a.staking_reward)?)
    }

    fn settle(&mut self) -> Result<(), SimError> {
        let h = self.height;
        let n = self.accounts.len();
        let burns = self.cfg.scheme.burns_fees();

        if self.cfg.fee_share == FeeSharePolicy::Pooled && !burns && !self.fee_pool.is_zero() {
            let validators: Vec<usize> = self.ledger.validators().map(|v| idx(v.id)).collect();
            let each = self.fee_pool.mul_div(1, validators.len() as u128)?;
            if !each.is_zero() {
                for &i in &validators {
                    let a = &mut self.accounts[i];
                    a.pending_fees = a.pending_fees.checked_add(each)?;
                    a.fee_income = a.fee_income.checked_add(each)?;
                }
                self.fee_pool = self.fee_pool.checked_sub(each.checked_mul(validators.len() as u128)?)?;
            }
        }

        let mut rewards = vec![TokenAmount::ZERO; n];
        if self.cfg.loyalty.enabled {
            let due = self.cfg.loyalty.annual_pool.mul_div(h as u128, self.blocks_per_year as u128)?;
            let slice = due.checked_sub(self.loyalty_released)?;
            self.loyalty_released = due;
            let payout = self.ledger.distribute_loyalty(slice, self.cfg.loyalty.include_standby)?;
            for (id, amount) in payout.allocations {
                rewards[idx(id)] = amount;
            }
        } else {
            for (i, r) in rewards.iter_mut().enumerate() {
                *r = self.reward_due(i, h)?;
            }
        }

        let slash_p = self.cfg.faults.slash_probability;
        for (i, &reward) in rewards.iter().enumerate() {
            self.mint(reward)?;
            let node = self.ledger.nodes()[i].clone();
            let mut penalty = self.accounts[i].pending_penalty;
            if slash_p > 0.0 && node.role == Role::Validator && self.rng.random_bool(slash_p) {
                penalty = penalty.checked_add(node.stake.mul_rate(self.cfg.faults.slash_fraction)?)?;
            }
            let a = &self.accounts[i];
            let br = EarningsBreakdown::settle(reward, a.pending_fees, a.pending_tips, penalty)?;
            let a = &mut self.accounts[i];
            a.staking_reward = a.staking_reward.checked_add(reward)?;
            a.penalties = a.penalties.checked_add(br.penalties)?;
            a.pending_fees = TokenAmount::ZERO;
            a.pending_tips = TokenAmount::ZERO;
            a.pending_penalty = TokenAmount::ZERO;
            self.burn(BurnKind::Penalty, br.penalties)?;
            if !br.stake_slash.is_zero() {
                let taken = self.ledger.slash(node.id, br.stake_slash)?;
                self.burn(BurnKind::Penalty, taken)?;
                let stake = self.ledger.nodes()[i].stake;
                let a = &mut self.accounts[i];
                a.stake_slashed = a.stake_slashed.checked_add(taken)?;
                a.anchor_height = h;
                a.anchor_stake = stake;
                a.reward_at_anchor = a.staking_reward;
            }

            let mut net = br.total;
            if self.cfg.treasury.enabled && !net.is_zero() {
                let invest = net.mul_rate(self.cfg.treasury.invest_fraction)?;
                if !invest.is_zero() {
                    let fee = self.entry_fee(invest)?;
                    self.treasury.invest(node.id, invest, fee)?;
                    let a = &mut self.accounts[i];
                    a.treasury_invested = a.treasury_invested.checked_add(invest)?;
                    net = net.checked_sub(invest)?;
                }
            }
            if self.cfg.escrow.enabled && !net.is_zero() {
                self.escrow[i].accrue(net, h)?;
            } else {
                let a = &mut self.accounts[i];
                a.liquid = a.liquid.checked_add(net)?;
            }
        }

        if self.cfg.escrow.enabled {
            let min_age = self.cfg.escrow.min_age_days * self.blocks_per_day;
            for i in 0..n {
                let bal = self.escrow[i].balance();
                let old_enough = self.escrow[i].oldest_deposit().is_some_and(|d| h - d >= min_age);
                if bal >= self.cfg.escrow.withdraw_at && old_enough {
                    let w = self.escrow[i].withdraw(bal, h, &self.escrow_table)?;
                    let a = &mut self.accounts[i];
                    a.liquid = a.liquid.checked_add(w.payout)?;
                    self.burn(BurnKind::Escrow, w.burned)?;
                }
            }
        }

        if self.cfg.treasury.enabled {
            let elapsed = (h - self.last_settled) as u128;
            let projects = self.cfg.treasury.projects.clone();
            for p in &projects {
                let Some(outstanding) = self.treasury.outstanding(&p.id) else { continue };
                let r = p.fee_return_rate.checked_mul(Rate::new(elapsed, self.blocks_per_year as u128)?)?;
                let back = outstanding.mul_rate(r)?;
                if !back.is_zero() {
                    self.external = self.external.checked_sub(back)?;
                    self.treasury.collect_project_fees(&p.id, back)?;
                }
            }
            let budget = self.treasury.fund().mul_rate(self.cfg.treasury.budget_rate)?;
            if !budget.is_zero() && !projects.is_empty() {
                let grants = self.treasury.distribute_to_projects(&projects, budget)?;
                for (_, g) in grants {
                    self.external = self.external.checked_add(g)?;
                }
            }
        }

        if h == self.duration() && self.cfg.treasury.redeem_at_end && !self.redeemed {
            self.redeemed = true;
            let holders: Vec<_> = self.treasury.holders().collect();
            for (id, shares) in holders {
                let out = self.treasury.redeem(id, shares)?;
                let a = &mut self.accounts[idx(id)];
                a.liquid = a.liquid.checked_add(out)?;
                a.treasury_redeemed = a.treasury_redeemed.checked_add(out)?;
            }
        }

        self.push_row()?;
        self.last_settled = h;
        self.audit()
    }

    fn push_row(&mut self) -> Result<(), SimError> {
        let d = self.totals.since(&self.epoch_start);
        self.epoch_start = self.totals;
        let env = self.last_env.unwrap_or(BlockEnv { tps: Rate::ZERO, multiplier: 1, tips_on: false });
        let escrow_balance = self.escrow_balance()?;
        self.history.push(EpochRow {
            epoch: self.history.len() as u64,
            end_height: self.height,
            supply: self.total_supply,
            minted: d.minted,
            burned: d.burned,
            fee_burned: d.fee_burned,
            penalty_burned: d.penalty_burned,
            escrow_burned: d.escrow_burned,
            fees_charged: d.fees_charged,
            tips: d.tips,
            base_fee: self.fee_market.base_fee,
            tps: env.tps.to_decimal_string(3),
            fee_multiplier: env.multiplier,
            tx_included: d.tx_included,
            tx_dropped: d.tx_dropped,
            mempool: self.mempool_len(),
            blocks_produced: d.blocks_produced,
            blocks_by_standby: d.blocks_by_standby,
            blocks_skipped: d.blocks_skipped,
            treasury_fund: self.treasury.fund(),
            escrow_balance,
        });
        Ok(())
    }

    fn escrow_balance(&self) -> Result<TokenAmount, MathError> {
        self.escrow.iter().try_fold(TokenAmount::ZERO, |acc, e| acc.checked_add(e.balance()))
    }

    /// Sum of every simulated holding.
    pub fn holdings(&self) -> Result<TokenAmount, MathError> {
        let mut sum = self.external.checked_add(self.fee_pool)?.checked_add(self.treasury.fund())?;
        sum = sum.checked_add(self.ledger.total_staked())?.checked_add(self.escrow_balance()?)?;
        for a in &self.accounts {
            sum = sum.checked_add(a.liquid)?.checked_add(a.pending())?;
        }
        Ok(sum)
    }

    /// Checks `supply = initial + minted - burned` and that holdings add up
    /// to the supply.
    pub fn audit(&self) -> Result<(), SimError> {
        let fail = |detail: String| SimError::Audit { height: self.height, detail };
        let expected = self
            .cfg
            .network
            .total_supply
            .checked_add(self.totals.minted)?
            .checked_sub(self.totals.burned)?;
        if expected != self.total_supply {
            return Err(fail(format!("supply {} but initial + minted - burned = {expected}", self.total_supply)));
        }
        let held = self.holdings()?;
        if held != self.total_supply {
            return Err(fail(format!("holdings {held} differ from supply {}", self.total_supply)));
        }
        Ok(())
    }

    /// `Σ gross earnings + fees burned + fee pool` against
    /// `fees charged + minted`; both sides are returned.
    pub fn earnings_identity(&self) -> Result<(TokenAmount, TokenAmount), MathError> {
        let mut lhs = self.totals.fee_burned.checked_add(self.fee_pool)?;
        for a in &self.accounts {
            lhs = lhs.checked_add(a.gross())?;
        }
        Ok((lhs, self.totals.fees_charged.checked_add(self.totals.minted)?))
    }

    /// Runs to the configured duration at the configured granularity.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while !self.is_finished() {
            match self.cfg.simulation.granularity {
                Granularity::PerBlock => self.step()?,
                Granularity::PerEpoch => self.advance_epoch()?,
            }
        }
        Ok(())
    }

    pub fn into_report(self) -> Result<SimulationReport, SimError> {
        if !self.is_finished() {
            return Err(SimError::NotFinished);
        }
        let metrics = compute_metrics(self.cfg.network.total_supply, &self.history, self.blocks_per_year)?;
        let nodes: Vec<NodeReport> = self
            .ledger
            .nodes()
            .iter()
            .zip(&self.accounts)
            .zip(&self.escrow)
            .map(|((n, a), e)| NodeReport {
                id: n.id,
                role: n.role,
                lock_years: n.lock_years,
                initial_stake: a.initial_stake,
                final_stake: n.stake,
                staking_reward: a.staking_reward,
                fee_income: a.fee_income,
                tips: a.tips,
                gross_earnings: a.gross(),
                penalties: a.penalties,
                stake_slashed: a.stake_slashed,
                net_earnings: a.gross().saturating_sub(a.penalties),
                blocks_produced: a.blocks_produced,
                slots_missed: a.slots_missed,
                escrow_balance: e.balance(),
                escrow_paid: e.total_paid(),
                escrow_burned: e.total_burned(),
                treasury_invested: a.treasury_invested,
                treasury_redeemed: a.treasury_redeemed,
                treasury_shares: self.treasury.shares_of(n.id).to_string(),
                liquid: a.liquid,
            })
            .collect();
        let avg = |role: Role| -> Result<TokenAmount, MathError> {
            let picked: Vec<&NodeReport> = nodes.iter().filter(|n| n.role == role).collect();
            if picked.is_empty() {
                return Ok(TokenAmount::ZERO);
            }
            let sum = picked.iter().try_fold(TokenAmount::ZERO, |acc, n| acc.checked_add(n.gross_earnings))?;
            sum.mul_div(1, picked.len() as u128)
        };
        let s = &self.cfg.scheme;
        let summary = Summary {
            metrics,
            validators: self.ledger.validator_count() as u32,
            standbys: self.ledger.standby_count() as u32,
            avg_validator_earnings: avg(Role::Validator)?,
            avg_standby_earnings: avg(Role::Standby)?,
            fee_dust: self.fee_pool,
            loyalty_dust: self.ledger.epoch_dust,
            treasury_fund: self.treasury.fund(),
            treasury_allocated: self.treasury.total_allocated(),
            treasury_collected: self.treasury.total_collected(),
            escrow_balance: self.escrow_balance()?,
            final_base_fee: self.fee_market.base_fee,
        };
        Ok(SimulationReport {
            scenario: self.cfg.name.clone(),
            seed: self.cfg.seed,
            granularity: self.cfg.simulation.granularity.name().to_string(),
            scheme: SchemeInfo {
                name: s.kind.name().to_string(),
                validator_rate: s.validator_rate.to_percent_string(3),
                standby_rate: s.standby_rate.to_percent_string(3),
                burns_fees: s.burns_fees(),
                loyalty_mode: self.cfg.loyalty.enabled,
                fee_share: self.cfg.fee_share.name().to_string(),
            },
            summary,
            nodes,
            timeseries: self.history,
            config: self.cfg.to_value(),
        })
    }
}

/// Runs a validated scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationReport, SimError> {
    let mut state = SimState::new(config)?;
    state.run_to_end()?;
    state.into_report()
}

/// Validates a raw configuration tree, then runs it.
pub fn run_value(value: &Value) -> Result<SimulationReport, SimError> {
    let cfg = ScenarioConfig::from_value(value)?;
    run_scenario(&cfg)
}
