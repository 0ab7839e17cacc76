//! Scenario configuration: the typed form, its schema check, and the
//! round-trip back to the on-disk key layout.
//!
//! Files are TOML (sections with dotted key paths) or JSON with the same
//! tree. Every numeric leaf also accepts a string, so amounts such as
//! `"0.0002"` and rates such as `"12.5%"` or `"1/8"` stay exact. The full key
//! list lives in `docs/config.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::amount::TokenAmount;
use crate::economics::{NetworkParams, DAYS_PER_YEAR};
use crate::escrow::{DecayMode, FeeTierRow, WithdrawalFeeTable};
use crate::fee_market::{FeeTier, FeeTierTable, TipConfig, TipMode};
use crate::ledger::{Role, SelectionPolicy};
use crate::rate::Rate;
use crate::rewards::{FeeDisposition, RewardScheme, SchemeKind};
use crate::treasury::Project;

pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.diagnostics.len())?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerBlock,
    #[default]
    PerEpoch,
}

/// How the distributable part of block fees reaches validators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeeSharePolicy {
    /// The block producer keeps its block's fees.
    #[default]
    Producer,
    /// Fees are pooled and split evenly across validators each epoch.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipPolicy {
    /// Tips only once the TPS ratio reaches the activation tier.
    #[default]
    Tiered,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrivals {
    /// Poisson transaction counts.
    #[default]
    Poisson,
    /// Expected counts with fractional carry and mid-range tips; no noise.
    Uniform,
}

macro_rules! name_parse {
    ($t:ty { $($s:literal => $v:expr),+ $(,)? }) => {
        impl FromStr for $t {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                match s { $($s => Ok($v),)+ _ => Err(()) }
            }
        }
        impl $t {
            pub fn name(&self) -> &'static str {
                $(if *self == $v { return $s; })+
                unreachable!()
            }
        }
    };
}

name_parse!(Granularity { "per_block" => Granularity::PerBlock, "per_epoch" => Granularity::PerEpoch });
name_parse!(FeeSharePolicy { "producer" => FeeSharePolicy::Producer, "pooled" => FeeSharePolicy::Pooled });
name_parse!(TipPolicy { "tiered" => TipPolicy::Tiered, "always" => TipPolicy::Always, "never" => TipPolicy::Never });
name_parse!(Arrivals { "poisson" => Arrivals::Poisson, "uniform" => Arrivals::Uniform });

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeGroup {
    pub role: Role,
    pub count: u32,
    pub stake: TokenAmount,
    pub lock_years: u32,
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BurstWindow {
    pub start_day: u64,
    pub multiplier: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrafficProfile {
    pub mean_tps: Rate,
    pub reference_tps: Rate,
    pub avg_gas_per_tx: u64,
    pub arrivals: Arrivals,
    pub mempool_cap: u64,
    /// Piecewise-constant TPS multipliers, sorted by start day.
    pub burst: Vec<BurstWindow>,
}

impl TrafficProfile {
    pub fn quiet() -> Self {
        TrafficProfile {
            mean_tps: Rate::ZERO,
            reference_tps: Rate::ONE,
            avg_gas_per_tx: 21_000,
            arrivals: Arrivals::Poisson,
            mempool_cap: 1_000_000,
            burst: Vec::new(),
        }
    }

    /// Scheduled TPS at `day`.
    pub fn tps_at(&self, day: u64) -> Rate {
        let m = self
            .burst
            .iter()
            .rev()
            .find(|w| w.start_day <= day)
            .map(|w| w.multiplier)
            .unwrap_or(Rate::ONE);
        self.mean_tps.checked_mul(m).unwrap_or(self.mean_tps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeMarketConfig {
    pub initial_base_fee: TokenAmount,
    pub min_base_fee: TokenAmount,
    pub gas_target: u64,
    pub dynamic_base_fee: bool,
    pub tiers: FeeTierTable,
    pub tip: TipConfig,
    pub tip_mode: TipMode,
    pub tips: TipPolicy,
    pub multiplier_override: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoyaltyConfig {
    pub enabled: bool,
    pub annual_pool: TokenAmount,
    pub include_standby: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EscrowConfig {
    pub enabled: bool,
    pub tiers: Vec<FeeTierRow>,
    pub zero_fee_age_days: u64,
    pub decay: DecayMode,
    pub threshold: TokenAmount,
    /// Operators withdraw their whole balance once it reaches this amount.
    pub withdraw_at: TokenAmount,
    /// Operators wait until the oldest deposit is at least this old.
    pub min_age_days: u64,
}

impl EscrowConfig {
    pub fn fee_table(&self, blocks_per_day: u64) -> WithdrawalFeeTable {
        WithdrawalFeeTable::new(
            self.tiers.clone(),
            self.zero_fee_age_days * blocks_per_day,
            self.decay,
            self.threshold,
        )
        .expect("escrow table validated at load")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreasuryConfig {
    pub enabled: bool,
    /// Fraction of each settled reward a node reinvests.
    pub invest_fraction: Rate,
    /// Entry fee on investments; `None` uses the escrow fee at age zero.
    pub entry_fee_rate: Option<Rate>,
    /// Fraction of the fund granted to projects each epoch.
    pub budget_rate: Rate,
    pub redeem_at_end: bool,
    pub projects: Vec<Project>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultConfig {
    /// Fraction of stake charged each time a validator misses its slot.
    pub inactivity_penalty_rate: Rate,
    /// Chance per validator per epoch of a slashing event.
    pub slash_probability: f64,
    pub slash_fraction: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationSettings {
    pub granularity: Granularity,
    pub duration_blocks: u64,
    pub block_time_seconds: u64,
    pub epoch_seconds: u64,
    pub selection: SelectionPolicy,
}

impl SimulationSettings {
    pub fn blocks_per_day(&self) -> u64 {
        SECONDS_PER_DAY / self.block_time_seconds
    }

    pub fn blocks_per_year(&self) -> u64 {
        self.blocks_per_day() * DAYS_PER_YEAR as u64
    }

    pub fn blocks_per_epoch(&self) -> u64 {
        self.epoch_seconds / self.block_time_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub scheme: RewardScheme,
    pub fee_share: FeeSharePolicy,
    pub network: NetworkParams,
    pub min_stake: TokenAmount,
    pub max_validators: u32,
    pub nodes: Vec<NodeGroup>,
    pub simulation: SimulationSettings,
    pub traffic: TrafficProfile,
    pub fee_market: FeeMarketConfig,
    pub loyalty: LoyaltyConfig,
    pub escrow: EscrowConfig,
    pub treasury: TreasuryConfig,
    pub faults: FaultConfig,
}

/// Reads a TOML or JSON file (by extension) into a value tree.
pub fn load_value(path: &Path) -> Result<Value, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_text(&text, is_json).map_err(|message| LoadError::Parse {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_text(text: &str, json: bool) -> Result<Value, String> {
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Sets a dotted key path in a value tree, creating intermediate tables.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key path `{path}`"));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| format!("`{}` is not a table", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!()
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, LoadOrConfigError> {
        let v = load_value(path)?;
        Ok(Self::from_value(&v)?)
    }

    /// Full schema check; every violation is reported with its key path.
    pub fn from_value(root: &Value) -> Result<Self, ConfigError> {
        let mut r = Reader::new(root);
        let cfg = read_config(&mut r);
        r.finish(cfg)
    }

    /// The resolved configuration in file layout, every key explicit.
    pub fn to_value(&self) -> Value {
        let s = &self.scheme;
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|g| {
                json!({
                    "role": g.role.to_string(),
                    "count": g.count,
                    "stake": g.stake.to_string(),
                    "lock_years": g.lock_years,
                    "availability": g.availability,
                })
            })
            .collect();
        let tiers: Vec<Value> = self
            .fee_market
            .tiers
            .tiers()
            .iter()
            .map(|t| json!({ "lower_bound": t.lower_bound.to_string(), "multiplier": t.multiplier }))
            .collect();
        let escrow_tiers: Vec<Value> = self
            .escrow
            .tiers
            .iter()
            .map(|t| json!({ "amount": t.amount_lower_bound.to_string(), "fee_rate": t.fee_rate.to_string() }))
            .collect();
        let projects: Vec<Value> = self
            .treasury
            .projects
            .iter()
            .map(|p| {
                json!({
                    "id": p.id,
                    "score": p.performance_score.to_string(),
                    "return_rate": p.fee_return_rate.to_string(),
                })
            })
            .collect();
        let burst: Vec<Value> = self
            .traffic
            .burst
            .iter()
            .map(|b| json!({ "start_day": b.start_day, "multiplier": b.multiplier.to_string() }))
            .collect();
        let mut fee_market = json!({
            "initial_base_fee": self.fee_market.initial_base_fee.to_string(),
            "min_base_fee": self.fee_market.min_base_fee.to_string(),
            "gas_target": self.fee_market.gas_target,
            "dynamic_base_fee": self.fee_market.dynamic_base_fee,
            "tip_activation_ratio": self.fee_market.tiers.tip_activation_ratio().to_string(),
            "tiers": tiers,
            "min_tip": self.fee_market.tip.min_tip.to_string(),
            "max_tip": self.fee_market.tip.max_tip.to_string(),
            "tip_mode": match self.fee_market.tip_mode { TipMode::Augment => "augment", TipMode::Replace => "replace" },
            "tips": self.fee_market.tips.name(),
        });
        if let Some(m) = self.fee_market.multiplier_override {
            fee_market["multiplier_override"] = json!(m);
        }
        let mut treasury = json!({
            "enabled": self.treasury.enabled,
            "invest_fraction": self.treasury.invest_fraction.to_string(),
            "budget_rate": self.treasury.budget_rate.to_string(),
            "redeem_at_end": self.treasury.redeem_at_end,
            "projects": projects,
        });
        if let Some(r) = self.treasury.entry_fee_rate {
            treasury["entry_fee_rate"] = json!(r.to_string());
        }
        json!({
            "name": self.name,
            "seed": self.seed,
            "scheme": {
                "name": s.kind.name(),
                "validator_rate": s.validator_rate.to_string(),
                "standby_rate": s.standby_rate.to_string(),
                "fee_disposition": match s.fee_disposition { FeeDisposition::Distribute => "distribute", FeeDisposition::Burn => "burn" },
                "fee_share": self.fee_share.name(),
            },
            "network": {
                "total_supply": self.network.total_supply.to_string(),
                "stake_per_node": self.network.stake_per_node.to_string(),
                "min_stake": self.min_stake.to_string(),
                "max_validators": self.max_validators,
            },
            "nodes": nodes,
            "simulation": {
                "granularity": self.simulation.granularity.name(),
                "duration_blocks": self.simulation.duration_blocks,
                "block_time_seconds": self.simulation.block_time_seconds,
                "epoch_seconds": self.simulation.epoch_seconds,
                "selection": match self.simulation.selection { SelectionPolicy::RoundRobin => "round_robin", SelectionPolicy::StakeLottery => "stake_lottery" },
            },
            "traffic": {
                "mean_tps": self.traffic.mean_tps.to_string(),
                "reference_tps": self.traffic.reference_tps.to_string(),
                "avg_gas_per_tx": self.traffic.avg_gas_per_tx,
                "arrivals": self.traffic.arrivals.name(),
                "mempool_cap": self.traffic.mempool_cap,
                "burst": burst,
            },
            "fee_market": fee_market,
            "loyalty": {
                "enabled": self.loyalty.enabled,
                "annual_pool": self.loyalty.annual_pool.to_string(),
                "include_standby": self.loyalty.include_standby,
            },
            "escrow": {
                "enabled": self.escrow.enabled,
                "tiers": escrow_tiers,
                "zero_fee_age_days": self.escrow.zero_fee_age_days,
                "decay": match self.escrow.decay { DecayMode::Linear => "linear", DecayMode::Step => "step" },
                "threshold": self.escrow.threshold.to_string(),
                "withdraw_at": self.escrow.withdraw_at.to_string(),
                "min_age_days": self.escrow.min_age_days,
            },
            "treasury": treasury,
            "faults": {
                "inactivity_penalty_rate": self.faults.inactivity_penalty_rate.to_string(),
                "slash_probability": self.faults.slash_probability,
                "slash_fraction": self.faults.slash_fraction.to_string(),
            },
        })
    }

    pub fn validator_count(&self) -> u32 {
        self.nodes.iter().filter(|g| g.role == Role::Validator).map(|g| g.count).sum()
    }

    pub fn standby_count(&self) -> u32 {
        self.nodes.iter().filter(|g| g.role == Role::Standby).map(|g| g.count).sum()
    }
}

#[derive(Debug, Error)]
pub enum LoadOrConfigError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Flattened view of a value tree with consumption tracking, so unknown
/// keys can be reported after all known keys are read.
struct Reader<'a> {
    leaves: BTreeMap<String, &'a Value>,
    arrays: BTreeMap<String, usize>,
    seen: BTreeSet<String>,
    diags: Vec<Diagnostic>,
}

fn flatten<'a>(v: &'a Value, prefix: &str, leaves: &mut BTreeMap<String, &'a Value>, arrays: &mut BTreeMap<String, usize>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                flatten(child, &join(k), leaves, arrays);
            }
        }
        Value::Array(items) if items.iter().all(Value::is_object) => {
            arrays.insert(prefix.to_string(), items.len());
            for (i, child) in items.iter().enumerate() {
                flatten(child, &format!("{prefix}[{i}]"), leaves, arrays);
            }
        }
        _ => {
            leaves.insert(prefix.to_string(), v);
        }
    }
}

impl<'a> Reader<'a> {
    fn new(root: &'a Value) -> Self {
        let mut leaves = BTreeMap::new();
        let mut arrays = BTreeMap::new();
        if root.is_object() {
            flatten(root, "", &mut leaves, &mut arrays);
        }
        let mut r = Reader { leaves, arrays, seen: BTreeSet::new(), diags: Vec::new() };
        if !root.is_object() {
            r.error("", "configuration root must be a table");
        }
        r
    }

    fn error(&mut self, path: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            path: if path.is_empty() { "<root>".into() } else { path.to_string() },
            message: message.into(),
        });
    }

    fn finish<T>(mut self, value: T) -> Result<T, ConfigError> {
        let unknown: Vec<String> = self.leaves.keys().filter(|k| !self.seen.contains(*k)).cloned().collect();
        for k in unknown {
            self.error(&k, "unknown key");
        }
        if self.diags.is_empty() {
            Ok(value)
        } else {
            Err(ConfigError { diagnostics: self.diags })
        }
    }

    fn raw(&mut self, path: &str) -> Option<&'a Value> {
        let v = self.leaves.get(path).copied();
        if v.is_some() {
            self.seen.insert(path.to_string());
        }
        v
    }

    fn array_len(&self, path: &str) -> Option<usize> {
        self.arrays.get(path).copied()
    }

    fn present(&self, path: &str) -> bool {
        self.leaves.contains_key(path)
    }

    /// Scalar as text: strings verbatim, numbers in shortest form.
    fn text(&mut self, path: &str) -> Option<Result<String, ()>> {
        match self.raw(path)? {
            Value::String(s) => Some(Ok(s.clone())),
            Value::Number(n) => Some(Ok(n.to_string())),
            Value::Bool(b) => Some(Ok(b.to_string())),
            _ => Some(Err(())),
        }
    }

    fn parsed<T>(&mut self, path: &str, default: Option<T>, expect: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        match self.text(path) {
            None => {
                if default.is_none() {
                    self.error(path, format!("required key missing (expected {expect})"));
                }
                default
            }
            Some(Err(())) => {
                self.error(path, format!("expected {expect}"));
                default
            }
            Some(Ok(s)) => match parse(s.trim()) {
                Some(v) => Some(v),
                None => {
                    self.error(path, format!("expected {expect}, got `{s}`"));
                    default
                }
            },
        }
    }

    fn u64(&mut self, path: &str, default: Option<u64>) -> Option<u64> {
        self.parsed(path, default, "a non-negative integer", |s| s.replace('_', "").parse().ok())
    }

    fn positive_u64(&mut self, path: &str, default: Option<u64>) -> Option<u64> {
        let v = self.u64(path, default)?;
        if v == 0 {
            self.error(path, "must be positive");
        }
        Some(v)
    }

    fn amount(&mut self, path: &str, default: Option<TokenAmount>) -> Option<TokenAmount> {
        self.parsed(path, default, "a non-negative token amount with at most 18 decimals", |s| s.parse().ok())
    }

    fn rate(&mut self, path: &str, default: Option<Rate>) -> Option<Rate> {
        self.parsed(path, default, "a non-negative rate such as 0.1, \"10%\" or \"1/8\"", |s| s.parse().ok())
    }

    fn fraction(&mut self, path: &str, default: Option<Rate>) -> Option<Rate> {
        let v = self.rate(path, default)?;
        if v > Rate::ONE {
            self.error(path, "must be between 0 and 1");
        }
        Some(v)
    }

    fn probability(&mut self, path: &str, default: f64) -> f64 {
        let v = self
            .parsed(path, Some(default), "a probability in [0, 1]", |s| s.parse::<f64>().ok())
            .unwrap_or(default);
        if !(0.0..=1.0).contains(&v) {
            self.error(path, "must be a probability in [0, 1]");
            return default;
        }
        v
    }

    fn boolean(&mut self, path: &str, default: bool) -> bool {
        match self.raw(path) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(Value::String(s)) if s == "true" || s == "false" => s == "true",
            Some(_) => {
                self.error(path, "expected true or false");
                default
            }
        }
    }

    fn string(&mut self, path: &str, default: &str) -> String {
        match self.raw(path) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.error(path, "expected a string");
                default.to_string()
            }
        }
    }

    fn choice<T: FromStr + Copy>(&mut self, path: &str, default: T, options: &str) -> T {
        let expect = format!("one of {options}");
        self.parsed(path, Some(default), &expect, |s| s.parse().ok()).unwrap_or(default)
    }
}

impl FromStr for Role {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "validator" => Ok(Role::Validator),
            "standby" => Ok(Role::Standby),
            _ => Err(()),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "round_robin" => Ok(SelectionPolicy::RoundRobin),
            "stake_lottery" => Ok(SelectionPolicy::StakeLottery),
            _ => Err(()),
        }
    }
}

fn read_config(r: &mut Reader) -> ScenarioConfig {
    let defaults = NetworkParams::xdc_mainnet_2024();
    let name = r.string("name", "scenario");
    let seed = r.u64("seed", None).unwrap_or(0);

    // scheme
    let kind = match r.text("scheme.name") {
        None => SchemeKind::CurrentModel,
        Some(Ok(s)) => match s.parse::<SchemeKind>() {
            Ok(k) => k,
            Err(e) => {
                r.error("scheme.name", e.to_string());
                SchemeKind::CurrentModel
            }
        },
        Some(Err(())) => {
            r.error("scheme.name", "expected a scheme name");
            SchemeKind::CurrentModel
        }
    };
    let mut scheme = RewardScheme::for_kind(kind);
    if kind == SchemeKind::EthStyle {
        let issuance = r.rate("scheme.issuance_rate", Some(scheme.validator_rate)).unwrap_or(scheme.validator_rate);
        scheme = RewardScheme::eth_style(issuance);
    }
    scheme.validator_rate = r.rate("scheme.validator_rate", Some(scheme.validator_rate)).unwrap_or(scheme.validator_rate);
    scheme.standby_rate = r.rate("scheme.standby_rate", Some(scheme.standby_rate)).unwrap_or(scheme.standby_rate);
    scheme.fee_disposition = match r.text("scheme.fee_disposition") {
        None => scheme.fee_disposition,
        Some(Ok(s)) if s == "distribute" => FeeDisposition::Distribute,
        Some(Ok(s)) if s == "burn" => FeeDisposition::Burn,
        Some(_) => {
            r.error("scheme.fee_disposition", "expected one of distribute, burn");
            scheme.fee_disposition
        }
    };
    let fee_share = r.choice("scheme.fee_share", FeeSharePolicy::Producer, "producer, pooled");

    // network and census
    let total_supply = r.amount("network.total_supply", Some(defaults.total_supply)).unwrap_or(defaults.total_supply);
    if total_supply.is_zero() {
        r.error("network.total_supply", "must be positive");
    }
    let stake_per_node = r.amount("network.stake_per_node", Some(defaults.stake_per_node)).unwrap_or(defaults.stake_per_node);
    let min_stake = r
        .amount("network.min_stake", Some(crate::ledger::DEFAULT_MIN_STAKE))
        .unwrap_or(crate::ledger::DEFAULT_MIN_STAKE);
    let max_validators = r.positive_u64("network.max_validators", Some(108)).unwrap_or(108) as u32;

    let mut nodes = Vec::new();
    match r.array_len("nodes") {
        Some(n) => {
            if n == 0 {
                r.error("nodes", "at least one node group required");
            }
            for i in 0..n {
                let p = |k: &str| format!("nodes[{i}].{k}");
                let role = match r.text(&p("role")) {
                    Some(Ok(s)) => match s.parse::<Role>() {
                        Ok(role) => role,
                        Err(()) => {
                            r.error(&p("role"), "expected one of validator, standby");
                            Role::Validator
                        }
                    },
                    _ => {
                        r.error(&p("role"), "required key missing (expected validator or standby)");
                        Role::Validator
                    }
                };
                let count = r.positive_u64(&p("count"), Some(1)).unwrap_or(1) as u32;
                let stake = r.amount(&p("stake"), Some(stake_per_node)).unwrap_or(stake_per_node);
                let lock_years = r.positive_u64(&p("lock_years"), Some(1)).unwrap_or(1) as u32;
                let availability = r.probability(&p("availability"), 1.0);
                if stake < min_stake {
                    r.error(&p("stake"), format!("below the minimum stake {min_stake}"));
                }
                nodes.push(NodeGroup { role, count, stake, lock_years, availability });
            }
        }
        None => {
            let nv = r.positive_u64("network.n_validators", Some(108)).unwrap_or(108) as u32;
            let ns = r.u64("network.n_standby", Some(108)).unwrap_or(108) as u32;
            let lock_years = r.positive_u64("network.lock_years", Some(1)).unwrap_or(1) as u32;
            let availability = r.probability("network.availability", 1.0);
            if stake_per_node < min_stake {
                r.error("network.stake_per_node", format!("below the minimum stake {min_stake}"));
            }
            nodes.push(NodeGroup { role: Role::Validator, count: nv, stake: stake_per_node, lock_years, availability });
            if ns > 0 {
                nodes.push(NodeGroup { role: Role::Standby, count: ns, stake: stake_per_node, lock_years, availability });
            }
        }
    }
    if r.array_len("nodes").is_some() {
        for k in ["network.n_validators", "network.n_standby", "network.lock_years", "network.availability"] {
            if r.present(k) {
                r.raw(k);
                r.error(k, "conflicts with an explicit [[nodes]] census");
            }
        }
    }
    let n_validators: u32 = nodes.iter().filter(|g| g.role == Role::Validator).map(|g| g.count).sum();
    let n_standby: u32 = nodes.iter().filter(|g| g.role == Role::Standby).map(|g| g.count).sum();
    if n_validators == 0 {
        r.error("nodes", "at least one validator required");
    }
    let staked = nodes
        .iter()
        .try_fold(TokenAmount::ZERO, |acc, g| g.stake.checked_mul(g.count as u128).and_then(|x| acc.checked_add(x)));
    match staked {
        Ok(s) if s <= total_supply => {}
        _ => r.error("network.total_supply", "smaller than the total stake of the node census"),
    }
    if n_validators > max_validators {
        r.error("network.max_validators", format!("census has {n_validators} validators, above the cap {max_validators}"));
    }

    // simulation
    let granularity = r.choice("simulation.granularity", Granularity::PerEpoch, "per_block, per_epoch");
    let block_time_seconds = r.positive_u64("simulation.block_time_seconds", Some(2)).unwrap_or(2);
    if block_time_seconds > 0 && !SECONDS_PER_DAY.is_multiple_of(block_time_seconds) {
        r.error("simulation.block_time_seconds", "must divide 86400");
    }
    let epoch_seconds = r.positive_u64("simulation.epoch_seconds", Some(SECONDS_PER_DAY)).unwrap_or(SECONDS_PER_DAY);
    if block_time_seconds > 0 && !epoch_seconds.is_multiple_of(block_time_seconds) {
        r.error("simulation.epoch_seconds", "must be a multiple of block_time_seconds");
    }
    let bt = block_time_seconds.max(1);
    let duration_blocks = match (r.present("simulation.duration_blocks"), r.present("simulation.duration_days")) {
        (true, true) => {
            r.raw("simulation.duration_days");
            r.error("simulation.duration_days", "give either duration_days or duration_blocks, not both");
            r.positive_u64("simulation.duration_blocks", None).unwrap_or(1)
        }
        (true, false) => r.positive_u64("simulation.duration_blocks", None).unwrap_or(1),
        (false, _) => {
            let days = r.positive_u64("simulation.duration_days", Some(DAYS_PER_YEAR as u64)).unwrap_or(1);
            days.saturating_mul(SECONDS_PER_DAY / bt)
        }
    };
    let selection = r.choice("simulation.selection", SelectionPolicy::RoundRobin, "round_robin, stake_lottery");

    // traffic
    let mean_tps = r.rate("traffic.mean_tps", Some(Rate::ZERO)).unwrap_or(Rate::ZERO);
    let reference_tps = r.rate("traffic.reference_tps", Some(Rate::ONE)).unwrap_or(Rate::ONE);
    if reference_tps.is_zero() {
        r.error("traffic.reference_tps", "must be positive");
    }
    let avg_gas_per_tx = r.positive_u64("traffic.avg_gas_per_tx", Some(21_000)).unwrap_or(21_000);
    let arrivals = r.choice("traffic.arrivals", Arrivals::Poisson, "poisson, uniform");
    let mempool_cap = r.u64("traffic.mempool_cap", Some(1_000_000)).unwrap_or(1_000_000);
    let mut burst = Vec::new();
    for i in 0..r.array_len("traffic.burst").unwrap_or(0) {
        let start_day = r.u64(&format!("traffic.burst[{i}].start_day"), None).unwrap_or(0);
        let multiplier = r.rate(&format!("traffic.burst[{i}].multiplier"), None).unwrap_or(Rate::ONE);
        burst.push(BurstWindow { start_day, multiplier });
    }
    if burst.windows(2).any(|w| w[1].start_day <= w[0].start_day) {
        r.error("traffic.burst", "start_day values must be strictly increasing");
    }

    // fee market
    let initial_base_fee = r
        .amount("fee_market.initial_base_fee", Some(TokenAmount::from_atoms(DEFAULT_BASE_FEE_ATOMS)))
        .unwrap_or(TokenAmount::ONE_ATOM);
    if initial_base_fee.is_zero() {
        r.error("fee_market.initial_base_fee", "must be at least one atom");
    }
    // the base fee floor defaults to the starting price
    let min_base_fee = r.amount("fee_market.min_base_fee", Some(initial_base_fee)).unwrap_or(TokenAmount::ONE_ATOM);
    if min_base_fee.is_zero() {
        r.error("fee_market.min_base_fee", "must be at least one atom");
    }
    if min_base_fee > initial_base_fee {
        r.error("fee_market.min_base_fee", "must not exceed initial_base_fee");
    }
    let gas_target = r.positive_u64("fee_market.gas_target", Some(15_000_000)).unwrap_or(15_000_000);
    if gas_target > 0 && avg_gas_per_tx > gas_target.saturating_mul(2) {
        r.error("traffic.avg_gas_per_tx", "a single transaction exceeds the block gas limit");
    }
    let dynamic_base_fee = r.boolean("fee_market.dynamic_base_fee", true);
    let tip_activation = r.rate("fee_market.tip_activation_ratio", Some(Rate::integer(100))).unwrap_or(Rate::integer(100));
    let tiers = match r.array_len("fee_market.tiers") {
        None => FeeTierTable::new(FeeTierTable::xdc_default().tiers().to_vec(), tip_activation).ok(),
        Some(n) => {
            let mut rows = Vec::new();
            for i in 0..n {
                let lower_bound = r.rate(&format!("fee_market.tiers[{i}].lower_bound"), None).unwrap_or(Rate::ZERO);
                let multiplier = r.positive_u64(&format!("fee_market.tiers[{i}].multiplier"), None).unwrap_or(1);
                rows.push(FeeTier { lower_bound, multiplier });
            }
            match FeeTierTable::new(rows, tip_activation) {
                Ok(t) => Some(t),
                Err(e) => {
                    r.error("fee_market.tiers", e.to_string());
                    None
                }
            }
        }
    }
    .unwrap_or_default();
    let tip_defaults = TipConfig::default();
    let min_tip = r.amount("fee_market.min_tip", Some(tip_defaults.min_tip)).unwrap_or(tip_defaults.min_tip);
    let max_tip = r.amount("fee_market.max_tip", Some(tip_defaults.max_tip)).unwrap_or(tip_defaults.max_tip);
    let tip = TipConfig::new(min_tip, max_tip).unwrap_or_else(|e| {
        r.error("fee_market.min_tip", e.to_string());
        tip_defaults
    });
    let tip_mode = match r.text("fee_market.tip_mode") {
        None => TipMode::Augment,
        Some(Ok(s)) if s == "augment" => TipMode::Augment,
        Some(Ok(s)) if s == "replace" => TipMode::Replace,
        Some(_) => {
            r.error("fee_market.tip_mode", "expected one of augment, replace");
            TipMode::Augment
        }
    };
    let tips = r.choice("fee_market.tips", TipPolicy::Tiered, "tiered, always, never");
    let multiplier_override = if r.present("fee_market.multiplier_override") {
        r.positive_u64("fee_market.multiplier_override", None)
    } else {
        None
    };

    // loyalty
    let loyalty = LoyaltyConfig {
        enabled: r.boolean("loyalty.enabled", false),
        annual_pool: r
            .amount("loyalty.annual_pool", Some(TokenAmount::from_tokens(194_400_000)))
            .unwrap_or(TokenAmount::ZERO),
        include_standby: r.boolean("loyalty.include_standby", true),
    };

    // escrow
    let default_rows = WithdrawalFeeTable::xdc_default(1).tiers().to_vec();
    let escrow_tiers = match r.array_len("escrow.tiers") {
        None => default_rows.clone(),
        Some(n) => (0..n)
            .map(|i| FeeTierRow {
                amount_lower_bound: r.amount(&format!("escrow.tiers[{i}].amount"), None).unwrap_or(TokenAmount::ZERO),
                fee_rate: r.fraction(&format!("escrow.tiers[{i}].fee_rate"), None).unwrap_or(Rate::ZERO),
            })
            .collect(),
    };
    let smallest = escrow_tiers.first().map(|t| t.amount_lower_bound).unwrap_or(TokenAmount::ZERO);
    let threshold = r.amount("escrow.threshold", Some(smallest)).unwrap_or(smallest);
    let zero_fee_age_days = r.positive_u64("escrow.zero_fee_age_days", Some(DAYS_PER_YEAR as u64)).unwrap_or(1);
    let decay = match r.text("escrow.decay") {
        None => DecayMode::Linear,
        Some(Ok(s)) if s == "linear" => DecayMode::Linear,
        Some(Ok(s)) if s == "step" => DecayMode::Step,
        Some(_) => {
            r.error("escrow.decay", "expected one of linear, step");
            DecayMode::Linear
        }
    };
    if let Err(e) = WithdrawalFeeTable::new(escrow_tiers.clone(), zero_fee_age_days.max(1), decay, threshold) {
        r.error("escrow.tiers", e.to_string());
    }
    let withdraw_at = r.amount("escrow.withdraw_at", Some(threshold)).unwrap_or(threshold);
    if withdraw_at < threshold {
        r.error("escrow.withdraw_at", format!("below the withdrawal threshold {threshold}"));
    }
    let escrow = EscrowConfig {
        enabled: r.boolean("escrow.enabled", false),
        tiers: escrow_tiers,
        zero_fee_age_days,
        decay,
        threshold,
        withdraw_at,
        min_age_days: r.u64("escrow.min_age_days", Some(0)).unwrap_or(0),
    };

    // treasury
    let mut projects = Vec::new();
    let mut ids = BTreeSet::new();
    for i in 0..r.array_len("treasury.projects").unwrap_or(0) {
        let p = |k: &str| format!("treasury.projects[{i}].{k}");
        let id = r.string(&p("id"), "");
        if id.is_empty() {
            r.error(&p("id"), "required non-empty string");
        } else if !ids.insert(id.clone()) {
            r.error(&p("id"), format!("duplicate project id `{id}`"));
        }
        let performance_score = r.rate(&p("score"), None).unwrap_or(Rate::ZERO);
        let fee_return_rate = r.fraction(&p("return_rate"), Some(Rate::ZERO)).unwrap_or(Rate::ZERO);
        projects.push(Project { id, performance_score, fee_return_rate });
    }
    let entry_fee_rate = if r.present("treasury.entry_fee_rate") {
        r.fraction("treasury.entry_fee_rate", None)
    } else {
        None
    };
    let treasury = TreasuryConfig {
        enabled: r.boolean("treasury.enabled", false),
        invest_fraction: r.fraction("treasury.invest_fraction", Some(Rate::ZERO)).unwrap_or(Rate::ZERO),
        entry_fee_rate,
        budget_rate: r.fraction("treasury.budget_rate", Some(Rate::ZERO)).unwrap_or(Rate::ZERO),
        redeem_at_end: r.boolean("treasury.redeem_at_end", true),
        projects,
    };
    if treasury.enabled && !treasury.budget_rate.is_zero() && treasury.projects.is_empty() {
        r.error("treasury.projects", "a positive budget_rate needs at least one project");
    }

    let faults = FaultConfig {
        inactivity_penalty_rate: r.fraction("faults.inactivity_penalty_rate", Some(Rate::ZERO)).unwrap_or(Rate::ZERO),
        slash_probability: r.probability("faults.slash_probability", 0.0),
        slash_fraction: r.fraction("faults.slash_fraction", Some(Rate::ZERO)).unwrap_or(Rate::ZERO),
    };

    let network = NetworkParams {
        n_validators,
        n_standby,
        stake_per_node,
        validator_rate: scheme.validator_rate,
        standby_rate: scheme.standby_rate,
        total_supply,
    };

    ScenarioConfig {
        name,
        seed,
        scheme,
        fee_share,
        network,
        min_stake,
        max_validators,
        nodes,
        simulation: SimulationSettings {
            granularity,
            duration_blocks,
            block_time_seconds: bt,
            epoch_seconds,
            selection,
        },
        traffic: TrafficProfile { mean_tps, reference_tps, avg_gas_per_tx, arrivals, mempool_cap, burst },
        fee_market: FeeMarketConfig {
            initial_base_fee,
            min_base_fee,
            gas_target,
            dynamic_base_fee,
            tiers,
            tip,
            tip_mode,
            tips,
            multiplier_override,
        },
        loyalty,
        escrow,
        treasury,
        faults,
    }
}

/// 10 gwei-equivalent per gas: 0.00021 per 21,000-gas transfer.
pub const DEFAULT_BASE_FEE_ATOMS: u128 = 10_000_000_000;
