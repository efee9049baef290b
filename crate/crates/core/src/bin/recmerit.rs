use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recmerit::market::BidsMode;
use recmerit::pipeline::{execute, fixture_config, Command, Overrides, PipelineError, RunConfig};
use recmerit::Zone;

/// Counterfactual day-ahead market clearing under projected REC fleets.
///
/// Exit status: 0 success, 2 configuration error, 3 data error (partial
/// outputs and a manifest listing the issues are still written).
#[derive(Parser)]
#[command(name = "recmerit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Registry statistics -> params/*.csv
    Derive(Common),
    /// Prosumer profiles and zonal REC series -> profiles/, series/
    Simulate(Common),
    /// Actual vs synthetic equilibria and impact tables -> market/, impact/, monthly/, hourly/
    Clear(Common),
    /// derive, simulate and clear in sequence
    RunAll(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the bundled synthetic inputs (written to <output>/fixture)
    #[arg(long, conflicts_with = "config")]
    fixture: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Scenario code; repeatable
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    /// Market zone; repeatable
    #[arg(long = "zone")]
    zones: Vec<Zone>,
    #[arg(long)]
    year: Option<i32>,
    /// Curve reconstruction from all valid bids or accepted ones only
    #[arg(long)]
    bids: Option<BidsMode>,
    /// Smoothing window (odd)
    #[arg(long)]
    window: Option<usize>,
    /// Price cap in EUR/MWh
    #[arg(long)]
    price_cap: Option<f64>,
    /// Bid ledger file; repeatable, replaces the configured list
    #[arg(long = "ledger")]
    ledgers: Vec<PathBuf>,
    /// Clearing worker threads (0 = number of CPUs)
    #[arg(long)]
    workers: Option<usize>,
}

fn build_config(c: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = if c.fixture {
        let output = c.output.clone().unwrap_or_else(|| PathBuf::from("out"));
        fixture_config(&output.join("fixture"), &output)?
    } else if let Some(path) = &c.config {
        RunConfig::load(path)?
    } else {
        RunConfig::default()
    };
    cfg.apply_env(std::env::vars())?;
    cfg.apply_overrides(&Overrides {
        scenarios: c.scenarios.clone(),
        zones: c.zones.clone(),
        year: c.year,
        bids_mode: c.bids,
        window: c.window,
        price_cap: c.price_cap,
        output: c.output.clone(),
        ledgers: c.ledgers.clone(),
        workers: c.workers,
    });
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Cmd::Derive(c) => (Command::Derive, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Clear(c) => (Command::Clear, c),
        Cmd::RunAll(c) => (Command::RunAll, c),
    };
    let result = build_config(common).and_then(|cfg| execute(command, &cfg));
    match result {
        Ok(manifest) => {
            for issue in &manifest.issues {
                eprintln!("issue: {issue}");
            }
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
