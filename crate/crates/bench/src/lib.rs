//! Scenario builders shared by the criterion benches.

use stakesim_core::sim::config::parse_text;
use stakesim_core::ScenarioConfig;

fn build(text: &str) -> ScenarioConfig {
    let value = parse_text(text, false).expect("bench scenario parses");
    ScenarioConfig::from_value(&value).expect("bench scenario validates")
}

/// Full mainnet-sized census, block-by-block, `days` days at `tps`.
pub fn per_block(days: u64, tps: u64) -> ScenarioConfig {
    build(&format!(
        "seed = 1\nname = \"bench-per-block\"\n[simulation]\ngranularity = \"per_block\"\nduration_days = {days}\n[traffic]\nmean_tps = {tps}\n"
    ))
}

/// Full mainnet-sized census, epoch-aggregated, `days` days at `tps`.
pub fn per_epoch(days: u64, tps: u64) -> ScenarioConfig {
    build(&format!(
        "seed = 1\nname = \"bench-per-epoch\"\n[simulation]\ngranularity = \"per_epoch\"\nduration_days = {days}\n[traffic]\nmean_tps = {tps}\n"
    ))
}
