//! Deterministic simulation of proof-of-stake masternode economics.
//!
//! The crate covers the closed-form emission and inflation arithmetic, a
//! dual-component fee market with burning and TPS-driven fee tiers,
//! per-scheme reward accounting, a masternode ledger with loyalty-weighted
//! payouts, a fee-bearing reward escrow, a reinvestment treasury, and a
//! seeded simulation loop that wires them together.

pub mod amount;
pub mod economics;
pub mod escrow;
pub mod fee_market;
pub mod ledger;
pub mod math;
pub mod rate;
pub mod rewards;
pub mod sim;
pub mod treasury;

pub use amount::{SignedTokenAmount, TokenAmount, ATOMS_PER_TOKEN};
pub use economics::{annual_emission, inflation_rate, NetworkParams};
pub use fee_market::{FeeMarketState, FeeTierTable, TipConfig, Transaction};
pub use ledger::{LedgerState, Masternode, NodeId, Role, SelectionPolicy};
pub use rate::Rate;
pub use rewards::{EarningsBreakdown, RewardScheme, SchemeKind};
pub use sim::config::ScenarioConfig;
pub use sim::report::SimulationReport;
pub use sim::run_scenario;
