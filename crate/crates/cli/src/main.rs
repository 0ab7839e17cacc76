use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stakesim_cli::{execute, Command, Options, SweepAxis, DEFAULT_MAX_POINTS, EXIT_INVALID};

/// Staking-economics simulator.
#[derive(Debug, Parser)]
#[command(name = "stakesim", version)]
struct Cli {
    /// Suppress normal output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for sweep and compare (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a scenario file and list every problem.
    Validate { config: PathBuf },
    /// Run one scenario; writes report.json and timeseries.csv.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid of variations; writes one report per point and sweep_summary.csv.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...` or `key=start:end:step`; repeat for more axes.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Largest grid allowed.
        #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
        max_points: usize,
    },
    /// Run several scenarios side by side; writes compare.csv.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut opts = Options { quiet: cli.quiet, threads: cli.threads, ..Options::default() };
    let cmd = match cli.cmd {
        Cmd::Validate { config } => Command::Validate(config),
        Cmd::Run { config, out } => Command::Run(config, out),
        Cmd::Sweep { config, axes, out, max_points } => {
            opts.max_points = max_points;
            match axes.iter().map(|a| SweepAxis::parse(a)).collect::<Result<Vec<_>, _>>() {
                Ok(parsed) => Command::Sweep(config, parsed, out),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_INVALID as u8);
                }
            }
        }
        Cmd::Compare { configs, out } => Command::Compare(configs, out),
    };
    let code = execute(&cmd, &opts, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
