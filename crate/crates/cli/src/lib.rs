//! Command implementations behind the `stakesim` binary.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
//! or I/O failure.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;
use stakesim_core::sim::config::{load_value, set_path, ConfigError, Diagnostic, LoadError};
use stakesim_core::sim::report::EpochRow;
use stakesim_core::sim::SimError;
use stakesim_core::{run_scenario, Rate, ScenarioConfig, SimulationReport};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const DEFAULT_MAX_POINTS: usize = 1_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Csv(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Config { .. } | CliError::Parse(_) => EXIT_INVALID,
            CliError::Io { .. } | CliError::Sim(_) | CliError::Csv(_) => EXIT_RUNTIME,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { path, source } => CliError::Io { context: format!("cannot read {path}"), source },
            LoadError::Parse { .. } => CliError::Parse(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Validate(PathBuf),
    Run(PathBuf, PathBuf),
    Sweep(PathBuf, Vec<SweepAxis>, PathBuf),
    Compare(Vec<PathBuf>, PathBuf),
}

#[derive(Debug, Clone)]
pub struct Options {
    pub quiet: bool,
    /// Worker threads for sweeps and comparisons; `None` uses every core.
    pub threads: Option<usize>,
    pub max_points: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { quiet: false, threads: None, max_points: DEFAULT_MAX_POINTS }
    }
}

/// Runs `cmd`, printing to `out`/`err`, and returns the exit code.
pub fn execute(cmd: &Command, opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cmd {
        Command::Validate(path) => match validate_config(path) {
            Ok(diags) if diags.is_empty() => {
                if !opts.quiet {
                    let _ = writeln!(out, "{}: ok", path.display());
                }
                return EXIT_OK;
            }
            Ok(diags) => {
                for d in &diags {
                    let _ = writeln!(err, "{}: {d}", path.display());
                }
                return EXIT_INVALID;
            }
            Err(e) => Err(e),
        },
        Command::Run(path, dir) => cmd_run(path, dir).map(|r| {
            if !opts.quiet {
                let _ = out.write_all(summary_table(&r).as_bytes());
            }
        }),
        Command::Sweep(path, axes, dir) => cmd_sweep(path, axes, dir, opts).map(|rows| {
            if !opts.quiet {
                let _ = writeln!(out, "{} grid points written to {}", rows, dir.display());
            }
        }),
        Command::Compare(paths, dir) => cmd_compare(paths, dir, opts).map(|table| {
            if !opts.quiet {
                let _ = out.write_all(table.as_bytes());
            }
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Sim(SimError::Config(c)) | CliError::Config { source: c, .. } = &e {
                for d in &c.diagnostics {
                    let _ = writeln!(err, "  {d}");
                }
            }
            e.exit_code()
        }
    }
}

/// Full schema check; an empty list means the file is valid.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>, CliError> {
    let value = load_value(path)?;
    Ok(match ScenarioConfig::from_value(&value) {
        Ok(_) => Vec::new(),
        Err(e) => e.diagnostics,
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let value = load_value(path)?;
    config_from(&value, path)
}

fn config_from(value: &Value, path: &Path) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::from_value(value).map_err(|source| CliError::Config { path: path.display().to_string(), source })
}

/// Writes files into `dir` so that either all of them appear or none do.
pub fn write_all_atomic(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), CliError> {
    let io_err = |context: String| move |source| CliError::Io { context, source };
    fs::create_dir_all(dir).map_err(io_err(format!("cannot create {}", dir.display())))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (name, bytes) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, bytes) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(io_err(format!("cannot write {}", tmp.display()))(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (i, (tmp, dest)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, dest) {
            cleanup(&staged[i..]);
            return Err(io_err(format!("cannot write {}", dest.display()))(e));
        }
    }
    Ok(())
}

fn csv_bytes<F>(fill: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    fill(&mut w).map_err(|e| CliError::Csv(e.to_string()))?;
    w.into_inner().map_err(|e| CliError::Csv(e.to_string()))
}

pub fn timeseries_csv(rows: &[EpochRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(|w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

/// Runs one scenario and writes `report.json` and `timeseries.csv`.
pub fn cmd_run(path: &Path, out_dir: &Path) -> Result<SimulationReport, CliError> {
    let cfg = load_config(path)?;
    let report = run_scenario(&cfg)?;
    write_report(&report, out_dir)?;
    Ok(report)
}

fn write_report(report: &SimulationReport, dir: &Path) -> Result<(), CliError> {
    let json = report.to_json().into_bytes();
    let csv = timeseries_csv(&report.timeseries)?;
    write_all_atomic(dir, &[("report.json", json), ("timeseries.csv", csv)])
}

pub fn summary_table(r: &SimulationReport) -> String {
    let m = &r.summary.metrics;
    let s = &r.summary;
    let rows: Vec<(&str, String)> = vec![
        ("scenario", r.scenario.clone()),
        ("scheme", r.scheme.name.clone()),
        ("granularity", r.granularity.clone()),
        ("seed", r.seed.to_string()),
        ("blocks", m.duration_blocks.to_string()),
        ("validators / standbys", format!("{} / {}", s.validators, s.standbys)),
        ("initial supply", m.initial_supply.to_string()),
        ("final supply", m.final_supply.to_string()),
        ("minted", m.total_minted.to_string()),
        ("burned", m.total_burned.to_string()),
        ("  fees", m.fee_burned.to_string()),
        ("  penalties", m.penalty_burned.to_string()),
        ("  escrow", m.escrow_burned.to_string()),
        ("net supply growth", m.net_supply_growth.to_string()),
        ("realized inflation", m.realized_inflation.clone()),
        ("fees charged", m.fees_charged.to_string()),
        ("transactions", m.tx_included.to_string()),
        ("avg validator earnings", s.avg_validator_earnings.to_string()),
        ("avg standby earnings", s.avg_standby_earnings.to_string()),
        ("final base fee", s.final_base_fee.to_string()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut t = String::new();
    for (k, v) in rows {
        let _ = writeln!(t, "{k:<width$}  {v}");
    }
    t
}

/// One sweep dimension: a dotted config key and the values it takes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// `key=v1,v2,...` or `key=start:end:step` (inclusive, exact decimals).
    pub fn parse(spec: &str) -> Result<SweepAxis, CliError> {
        let bad = |m: &str| CliError::Invalid(format!("axis `{spec}`: {m}"));
        let (key, rhs) = spec.split_once('=').ok_or_else(|| bad("expected key=values"))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(bad("empty key path"));
        }
        let rhs = rhs.trim();
        if rhs.is_empty() {
            return Err(bad("no values"));
        }
        let parts: Vec<&str> = rhs.split(':').collect();
        let values = if parts.len() == 3 {
            let num = |s: &str| s.trim().parse::<Rate>().map_err(|_| bad("range bounds must be non-negative decimals"));
            let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step.is_zero() {
                return Err(bad("range step must be positive"));
            }
            if end < start {
                return Err(bad("empty range"));
            }
            let decimals = [parts[0], parts[1], parts[2]]
                .iter()
                .map(|p| p.trim().split_once('.').map_or(0, |(_, f)| f.len()))
                .max()
                .unwrap_or(0) as u32;
            let mut v = Vec::new();
            let mut x = start;
            while x <= end {
                v.push(x.to_decimal_string(decimals));
                x = x.checked_add(step).map_err(|_| bad("range overflows"))?;
                if v.len() > 1_000_000 {
                    return Err(bad("range too long"));
                }
            }
            v
        } else if parts.len() == 1 {
            rhs.split(',').map(|s| s.trim().to_string()).collect()
        } else {
            return Err(bad("ranges take the form start:end:step"));
        };
        if values.iter().any(String::is_empty) {
            return Err(bad("empty value in list"));
        }
        Ok(SweepAxis { key: key.to_string(), values })
    }
}

/// Cartesian product in enumeration order: the first axis varies slowest.
pub fn grid(axes: &[SweepAxis]) -> Vec<Vec<String>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

fn pool(opts: &Options) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Invalid(e.to_string()))
}

const HEADLINE: [&str; 11] = [
    "realized_inflation",
    "net_supply_growth",
    "total_minted",
    "total_burned",
    "fee_burned",
    "fees_charged",
    "tips",
    "avg_validator_earnings",
    "avg_standby_earnings",
    "final_supply",
    "final_base_fee",
];

fn headline(r: &SimulationReport) -> Vec<String> {
    let m = &r.summary.metrics;
    vec![
        m.realized_inflation_precise.clone(),
        m.net_supply_growth.to_string(),
        m.total_minted.to_string(),
        m.total_burned.to_string(),
        m.fee_burned.to_string(),
        m.fees_charged.to_string(),
        m.tips.to_string(),
        r.summary.avg_validator_earnings.to_string(),
        r.summary.avg_standby_earnings.to_string(),
        m.final_supply.to_string(),
        r.summary.final_base_fee.to_string(),
    ]
}

/// Runs every grid point; writes `point-NNNN/` reports and
/// `sweep_summary.csv`. Returns the number of points.
pub fn cmd_sweep(path: &Path, axes: &[SweepAxis], out_dir: &Path, opts: &Options) -> Result<usize, CliError> {
    if axes.is_empty() {
        return Err(CliError::Invalid("at least one --axis is required".into()));
    }
    let base = load_value(path)?;
    config_from(&base, path)?;
    let total = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()));
    match total {
        Some(n) if n <= opts.max_points => {}
        _ => {
            return Err(CliError::Invalid(format!(
                "sweep grid exceeds the cap of {} points (raise --max-points)",
                opts.max_points
            )))
        }
    }
    let points = grid(axes);
    let mut configs = Vec::with_capacity(points.len());
    for values in &points {
        let mut v = base.clone();
        for (axis, value) in axes.iter().zip(values) {
            set_path(&mut v, &axis.key, Value::String(value.clone()))
                .map_err(|m| CliError::Invalid(format!("axis `{}`: {m}", axis.key)))?;
        }
        let cfg = ScenarioConfig::from_value(&v).map_err(|source| CliError::Config {
            path: format!("{} with {}", path.display(), describe(axes, values)),
            source,
        })?;
        configs.push(cfg);
    }
    let reports: Vec<Result<SimulationReport, SimError>> = pool(opts)?.install(|| configs.par_iter().map(run_scenario).collect());
    let mut rows = Vec::with_capacity(reports.len());
    for (i, (report, values)) in reports.into_iter().zip(&points).enumerate() {
        let report = report?;
        write_report(&report, &out_dir.join(format!("point-{i:04}")))?;
        let mut row = vec![i.to_string()];
        row.extend(values.iter().cloned());
        row.extend(headline(&report));
        rows.push(row);
    }
    let csv = csv_bytes(|w| {
        let mut header = vec!["point".to_string()];
        header.extend(axes.iter().map(|a| a.key.clone()));
        header.extend(HEADLINE.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for r in &rows {
            w.write_record(r)?;
        }
        Ok(())
    })?;
    write_all_atomic(out_dir, &[("sweep_summary.csv", csv)])?;
    Ok(rows.len())
}

fn describe(axes: &[SweepAxis], values: &[String]) -> String {
    axes.iter().zip(values).map(|(a, v)| format!("{}={v}", a.key)).collect::<Vec<_>>().join(", ")
}

const COMPARE_ROWS: [&str; 12] = [
    "scenario",
    "scheme",
    "realized_inflation",
    "net_supply_growth",
    "total_minted",
    "total_burned",
    "fee_burned",
    "fees_charged",
    "avg_validator_earnings",
    "avg_standby_earnings",
    "final_supply",
    "blocks",
];

fn compare_column(r: &SimulationReport) -> Vec<String> {
    let m = &r.summary.metrics;
    vec![
        r.scenario.clone(),
        r.scheme.name.clone(),
        m.realized_inflation_precise.clone(),
        m.net_supply_growth.to_string(),
        m.total_minted.to_string(),
        m.total_burned.to_string(),
        m.fee_burned.to_string(),
        m.fees_charged.to_string(),
        r.summary.avg_validator_earnings.to_string(),
        r.summary.avg_standby_earnings.to_string(),
        m.final_supply.to_string(),
        m.duration_blocks.to_string(),
    ]
}

/// Runs each config and writes `compare.csv` with one column per config.
/// Returns the printed table.
pub fn cmd_compare(paths: &[PathBuf], out_dir: &Path, opts: &Options) -> Result<String, CliError> {
    if paths.len() < 2 {
        return Err(CliError::Invalid("compare needs at least two configs".into()));
    }
    let configs = paths.iter().map(|p| load_config(p)).collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<Result<SimulationReport, SimError>> = pool(opts)?.install(|| configs.par_iter().map(run_scenario).collect());
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let columns: Vec<Vec<String>> = reports.iter().map(compare_column).collect();
    let header: Vec<String> = std::iter::once("metric".to_string())
        .chain(paths.iter().map(|p| p.display().to_string()))
        .collect();
    let table: Vec<Vec<String>> = COMPARE_ROWS
        .iter()
        .enumerate()
        .map(|(i, name)| std::iter::once(name.to_string()).chain(columns.iter().map(|c| c[i].clone())).collect())
        .collect();
    let csv = csv_bytes(|w| {
        w.write_record(&header)?;
        for r in &table {
            w.write_record(r)?;
        }
        Ok(())
    })?;
    write_all_atomic(out_dir, &[("compare.csv", csv)])?;

    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in &table {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    for r in std::iter::once(&header).chain(&table) {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(text, "{}", cells.join("  ").trim_end());
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_list_and_range() {
        let a = SweepAxis::parse("fee_market.multiplier_override=1,10,20").unwrap();
        assert_eq!(a.values, vec!["1", "10", "20"]);
        let r = SweepAxis::parse("traffic.mean_tps=0.5:2:0.5").unwrap();
        assert_eq!(r.values, vec!["0.5", "1.0", "1.5", "2.0"]);
        assert!(SweepAxis::parse("traffic.mean_tps=").is_err());
        assert!(SweepAxis::parse("traffic.mean_tps=3:1:1").is_err());
        assert!(SweepAxis::parse("=1,2").is_err());
        assert!(SweepAxis::parse("a=1:2:0").is_err());
    }

    #[test]
    fn grid_order() {
        let a = SweepAxis { key: "a".into(), values: vec!["1".into(), "2".into()] };
        let b = SweepAxis { key: "b".into(), values: vec!["x".into(), "y".into(), "z".into()] };
        let g = grid(&[a, b]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec!["1", "x"]);
        assert_eq!(g[2], vec!["1", "z"]);
        assert_eq!(g[3], vec!["2", "x"]);
    }
}
