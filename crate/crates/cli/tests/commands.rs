//! End-to-end behaviour of the four subcommands, through both the library
//! entry points and the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use stakesim_cli::{cmd_compare, cmd_run, cmd_sweep, validate_config, Options, SweepAxis, EXIT_INVALID, EXIT_OK, EXIT_RUNTIME};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "seed = 9\n[scheme]\nname = \"scheme2\"\n[network]\nn_validators = 4\nn_standby = 4\ntotal_supply = \"1000000000\"\n[simulation]\nduration_days = 2\n[traffic]\nmean_tps = 5\n";

fn stakesim(args: &[&str]) -> (i32, String, String) {
    let o = Proc::new(env!("CARGO_BIN_EXE_stakesim")).args(args).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let p = entry.unwrap().path();
        assert!(validate_config(&p).unwrap().is_empty(), "{}", p.display());
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn validate_reports_key_paths() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.toml", "seed = 1\n[scheme]\nvalidator_rate = -1\n");
    let diags = validate_config(&p).unwrap();
    assert!(diags.iter().any(|d| d.path == "scheme.validator_rate"), "{diags:?}");

    let p = write(dir.path(), "noseed.toml", "[network]\nn_validators = 3\n");
    let diags = validate_config(&p).unwrap();
    assert!(diags.iter().any(|d| d.path == "seed"), "{diags:?}");

    let (code, _, err) = stakesim(&["validate", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("seed"));
}

#[test]
fn validate_binary_accepts_good_file() {
    let p = configs_dir().join("scheme1.toml");
    let (code, out, _) = stakesim(&["validate", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("ok"));
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_run(&cfg, &a).unwrap();
    cmd_run(&cfg, &b).unwrap();
    for f in ["report.json", "timeseries.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 9);
    assert_eq!(json["config"]["nodes"][0]["count"], 4);
}

#[test]
fn run_into_a_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let blocker = write(dir.path(), "blocker", "x");
    let (code, _, err) = stakesim(&["run", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(code, EXIT_RUNTIME, "{err}");
    assert_eq!(fs::read_to_string(&blocker).unwrap(), "x");
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn run_missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = dir.path().join("out");
    let (code, _, _) = stakesim(&["run", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_RUNTIME);
    assert!(!out.exists());
}

#[test]
fn sweep_over_fee_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = dir.path().join("sweep");
    let axis = SweepAxis::parse("fee_market.multiplier_override=1,10,20,50,100").unwrap();
    assert_eq!(cmd_sweep(&cfg, &[axis], &out, &Options::default()).unwrap(), 5);
    let mut rdr = csv::Reader::from_path(out.join("sweep_summary.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let burn_col = headers.iter().position(|h| h == "fee_burned").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let burns: Vec<f64> = rows.iter().map(|r| r[burn_col].parse().unwrap()).collect();
    assert!(burns.windows(2).all(|w| w[0] < w[1]), "{burns:?}");
    for i in 0..5 {
        assert!(out.join(format!("point-{i:04}/report.json")).exists());
    }
}

#[test]
fn sweep_grid_is_row_major() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = dir.path().join("sweep");
    let axes = [
        SweepAxis::parse("traffic.mean_tps=1,2").unwrap(),
        SweepAxis::parse("fee_market.multiplier_override=1:3:1").unwrap(),
    ];
    assert_eq!(cmd_sweep(&cfg, &axes, &out, &Options::default()).unwrap(), 6);
    let mut rdr = csv::Reader::from_path(out.join("sweep_summary.csv")).unwrap();
    let pairs: Vec<(String, String)> = rdr.records().map(|r| r.unwrap()).map(|r| (r[1].to_string(), r[2].to_string())).collect();
    let want: Vec<(String, String)> =
        [("1", "1"), ("1", "2"), ("1", "3"), ("2", "1"), ("2", "2"), ("2", "3")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    assert_eq!(pairs, want);
}

#[test]
fn sweep_rejects_bad_axes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = dir.path().join("sweep");
    assert!(SweepAxis::parse("traffic.mean_tps=").is_err());
    assert!(cmd_sweep(&cfg, &[], &out, &Options::default()).is_err());
    let big = SweepAxis::parse("traffic.mean_tps=1:100:1").unwrap();
    let opts = Options { max_points: 10, ..Options::default() };
    assert!(cmd_sweep(&cfg, &[big], &out, &opts).is_err());
    let bogus = SweepAxis::parse("traffic.no_such_key=1,2").unwrap();
    assert!(cmd_sweep(&cfg, &[bogus], &out, &Options::default()).is_err());
    assert!(!out.exists());

    let (code, _, _) = stakesim(&["sweep", cfg.to_str().unwrap(), "--axis", "traffic.mean_tps=", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn compare_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.toml", &SMALL.replace("scheme2", "current"));
    let two = write(dir.path(), "two.toml", SMALL);
    let out = dir.path().join("cmp");
    let table = cmd_compare(&[one.clone(), two.clone()], &out, &Options::default()).unwrap();
    assert!(table.contains("realized_inflation"));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(out.join("compare.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let growth = rows.iter().find(|r| &r[0] == "net_supply_growth").unwrap();
    let (g1, g2): (f64, f64) = (growth[1].parse().unwrap(), growth[2].parse().unwrap());
    assert!(g2 < g1, "{g1} vs {g2}");

    let same = dir.path().join("same");
    cmd_compare(&[two.clone(), two.clone()], &same, &Options::default()).unwrap();
    let mut rdr = csv::Reader::from_path(same.join("compare.csv")).unwrap();
    for r in rdr.records() {
        let r = r.unwrap();
        assert_eq!(&r[1], &r[2]);
    }

    assert!(cmd_compare(std::slice::from_ref(&two), &dir.path().join("x"), &Options::default()).is_err());
    let (code, _, _) = stakesim(&["compare", two.to_str().unwrap(), "--out", dir.path().join("y").to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
}
