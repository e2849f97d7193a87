//! `saddlesim` — experiment harness for the distributed saddle-point
//! simulator.
//!
//! Subcommands:
//!
//! - `run <config.json>` — run every solver in the config; emit one trace
//!   CSV per solver plus an overlay SVG; print a JSON summary.
//! - `analyze <config.json>` — print the certificate/spectra report.
//! - `speedup --n 8,16,32 --target 1e-12 <family.json>` — network-scaling
//!   table (centralized vs gradient tracking).
//! - `sweep --param alpha --grid 0.01,0.02,0.05 <config.json>` — rerun the
//!   manual-mode solvers across a stepsize grid.
//!
//! Exit codes: 0 success; 2 config error; 3 all solvers diverged;
//! 4 assumption violation; 1 anything else. The environment variable
//! `SADDLESIM_OUTPUT_DIR` re-roots all relative output paths.

// Guards are written `!(x > y)` rather than `x <= y` so that NaN falls on
// the rejecting side of every comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod csvout;
mod error;
mod experiment;
mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::HarnessError;

use crate::config::load_config;
use crate::experiment::{
    analyze, run_experiment, run_report_json, speedup, speedup_json, sweep, SweepParam,
};

#[derive(Parser)]
#[command(
    name = "saddlesim",
    version,
    about = "Distributed saddle-point optimization simulator and analysis harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParamArg {
    Alpha,
    Beta,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver in the config and write trace CSVs plus an SVG.
    Run {
        /// Experiment config (JSON).
        config: PathBuf,
    },
    /// Print the certificate and spectral analysis report as JSON.
    Analyze {
        /// Experiment config (JSON).
        config: PathBuf,
    },
    /// Iteration-ratio scaling table: centralized vs gradient tracking.
    Speedup {
        /// Comma-separated network sizes, e.g. 8,16,32.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Optimality gap both loops must reach.
        #[arg(long)]
        target: f64,
        /// Family config (JSON); its problem/topology are re-sized per n.
        config: PathBuf,
    },
    /// Rerun the config's manual-mode solvers over a stepsize grid.
    Sweep {
        /// Which stepsize to vary.
        #[arg(long, value_enum)]
        param: SweepParamArg,
        /// Comma-separated grid of positive values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        /// Experiment config (JSON); all solvers must be manual mode.
        config: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let report = run_experiment(&cfg)?;
            print_json(&run_report_json(&report));
        }
        Command::Analyze { config } => {
            let cfg = load_config(&config)?;
            print_json(&analyze(&cfg)?);
        }
        Command::Speedup { n, target, config } => {
            let cfg = load_config(&config)?;
            let report = speedup(&cfg, &n, target)?;
            if !report.monotone {
                eprintln!("warning: iteration ratios are not monotone in n");
            }
            print_json(&speedup_json(&cfg, target, &report));
        }
        Command::Sweep {
            param,
            grid,
            config,
        } => {
            let cfg = load_config(&config)?;
            let param = match param {
                SweepParamArg::Alpha => SweepParam::Alpha,
                SweepParamArg::Beta => SweepParam::Beta,
            };
            print_json(&sweep(&cfg, param, &grid)?);
        }
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("reports always serialize");
    // Ignore a closed stdout (e.g. piped into `head`) instead of panicking.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
