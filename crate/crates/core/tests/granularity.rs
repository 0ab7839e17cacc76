//! The per-block and per-epoch engines should tell the same story.

use stakesim_core::sim::config::{parse_text, ScenarioConfig};
use stakesim_core::sim::report::SimulationReport;
use stakesim_core::sim::run_scenario;
use stakesim_core::TokenAmount;

fn run(text: &str) -> SimulationReport {
    run_scenario(&ScenarioConfig::from_value(&parse_text(text, false).unwrap()).unwrap()).unwrap()
}

fn rel_diff(a: TokenAmount, b: TokenAmount) -> f64 {
    let (a, b) = (a.atoms() as f64, b.atoms() as f64);
    (a - b).abs() / a.max(b).max(1.0)
}

fn pair(body: &str) -> (SimulationReport, SimulationReport) {
    let a = run(&format!("{body}\n[simulation]\ngranularity = \"per_block\"\nduration_days = 7\n"));
    let b = run(&format!("{body}\n[simulation]\ngranularity = \"per_epoch\"\nduration_days = 7\n"));
    (a, b)
}

const NET: &str = "seed = 3\n[network]\nn_validators = 12\nn_standby = 12\ntotal_supply = \"1000000000\"\n";

#[test]
fn uniform_traffic_agrees() {
    let (a, b) = pair(&format!("{NET}[traffic]\nmean_tps = 10\narrivals = \"uniform\"\n"));
    let (ma, mb) = (&a.summary.metrics, &b.summary.metrics);
    assert_eq!(ma.total_minted, mb.total_minted);
    assert_eq!(ma.tx_included, mb.tx_included);
    assert!(rel_diff(ma.fees_charged, mb.fees_charged) < 1e-3);
    assert!(rel_diff(ma.total_burned, mb.total_burned) < 1e-3);
}

#[test]
fn burning_scheme_agrees() {
    let (a, b) = pair(&format!("{NET}[scheme]\nname = \"scheme2\"\n[traffic]\nmean_tps = 10\narrivals = \"uniform\"\n"));
    let (ma, mb) = (&a.summary.metrics, &b.summary.metrics);
    assert_eq!(ma.total_minted, mb.total_minted);
    assert!(ma.fee_burned > TokenAmount::ZERO);
    assert!(rel_diff(ma.fee_burned, mb.fee_burned) < 1e-3);
}

#[test]
fn poisson_traffic_agrees_statistically() {
    let (a, b) = pair(&format!("{NET}[traffic]\nmean_tps = 10\n"));
    let (ma, mb) = (&a.summary.metrics, &b.summary.metrics);
    assert_eq!(ma.total_minted, mb.total_minted);
    // about 1.2M transactions each, so the counts differ by well under 1%
    assert!(rel_diff(ma.fees_charged, mb.fees_charged) < 1e-2);
}

#[test]
fn quiet_year_pays_nominal_rates() {
    let r = run("seed = 1\n[simulation]\nduration_days = 365\n[traffic]\nmean_tps = 0\n");
    let m = &r.summary.metrics;
    let want = TokenAmount::from_tokens(194_400_000);
    assert!(m.total_minted.atoms().abs_diff(want.atoms()) <= 216);
    assert_eq!(m.realized_inflation, "0.512%");
    for n in &r.nodes {
        let per = match n.role {
            stakesim_core::ledger::Role::Validator => 1_000_000,
            stakesim_core::ledger::Role::Standby => 800_000,
        };
        assert!(n.gross_earnings.atoms().abs_diff(TokenAmount::from_tokens(per).atoms()) <= 1, "{:?}", n.id);
    }
}
