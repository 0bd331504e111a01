//! `bee-ident`: batch front end for benchmarks, direct simulations, parameter
//! sweeps, grid scans and identification runs.
//!
//! Every run writes its effective configuration to `<out>/run_config.json`;
//! passing that file back with `--config` reproduces the result files byte
//! for byte. Exit codes: 0 success, 1 runtime or solver failure, 2 usage or
//! configuration error.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use bee_ident::inverse::{FixedParam, ParamName};
use clap::{Args, Parser, Subcommand};

use config::{bench_runs, Preset, RunConfig, Task};

#[derive(Parser, Debug)]
#[command(name = "bee-ident", version, about = "Bee colony parameter identification for reactive channel flow")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Stored run configuration (JSON) to start from.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for objective evaluations.
    #[arg(long, global = true, env = "BEE_IDENT_WORKERS")]
    workers: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override a configuration entry, e.g. `--set transport.dt=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run MBC on benchmark functions and check the known minima.
    Bench {
        /// Benchmark names, or `all`.
        names: Vec<String>,
    },
    /// Run one direct simulation and write its breakthrough curve.
    Simulate {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Times at which to write field snapshots.
        #[arg(long = "snapshot", value_delimiter = ',')]
        snapshots: Vec<f64>,
    },
    /// Simulate once per value of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// One of pe, da_a, da_d, m_cap.
        parameter: Option<String>,
        /// Comma-separated values.
        #[arg(value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Evaluate the residual on a uniform grid over two free parameters.
    Scan {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Fixed parameter as `name=value` (Langmuir only).
        #[arg(long)]
        fix: Option<String>,
        /// Grid size as `N1xN2`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Identify isotherm parameters with MBC.
    Identify {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.common.quiet;
    let outcome = resolve(cli).map_err(Failure::Usage).and_then(|cfg| run::execute(&cfg, quiet));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let Cli { common, command } = cli;
    let stored = common.config.as_deref().map(RunConfig::load).transpose()?;
    if let Some(cfg) = &stored {
        if cfg.task.command() != command.name() {
            bail!("config is for '{}', not '{}'", cfg.task.command(), command.name());
        }
    }
    let base = stored.as_ref().map(|c| c.task.clone());
    let preset_of = |p: Option<Preset>| p.unwrap_or(Preset::Henry);
    let task = match command {
        Command::Bench { names } => match base {
            Some(task) if names.is_empty() => task,
            _ => Task::Bench { runs: bench_runs(&names)? },
        },
        Command::Simulate { preset, snapshots } => {
            let (transport, stored_snaps) = match (base, preset) {
                (Some(Task::Simulate { transport, snapshots }), None) => (transport, snapshots),
                _ => (preset_of(preset).transport(), Vec::new()),
            };
            let snapshots = if snapshots.is_empty() { stored_snaps } else { snapshots };
            Task::Simulate { transport, snapshots }
        }
        Command::Sweep { preset, parameter, values } => {
            let (transport, stored_param, stored_values) = match (base, preset) {
                (Some(Task::Sweep { transport, parameter, values }), None) => (transport, Some(parameter), values),
                (Some(Task::Sweep { parameter, values, .. }), Some(p)) => (p.transport(), Some(parameter), values),
                _ => (preset_of(preset).transport(), None, Vec::new()),
            };
            let parameter = parameter
                .or(stored_param)
                .ok_or_else(|| anyhow!("sweep needs a parameter name (pe, da_a, da_d or m_cap)"))?;
            let values = if values.is_empty() { stored_values } else { values };
            Task::Sweep { transport, parameter, values }
        }
        Command::Scan { preset, fix, grid } => {
            let (problem, stored_fixed, stored_grid) = match (base, preset) {
                (Some(Task::Scan { problem, fixed, grid }), None) => (problem, fixed, grid),
                _ => {
                    let p = preset_of(preset);
                    (p.problem(), p.scan_fixed(), [20, 20])
                }
            };
            let fixed = match fix {
                Some(text) => parse_fixed(&text)?,
                None => stored_fixed,
            };
            let grid = match grid {
                Some(text) => parse_grid(&text)?,
                None => stored_grid,
            };
            Task::Scan { problem, fixed, grid }
        }
        Command::Identify { preset } => match (base, preset) {
            (Some(task), None) => task,
            _ => Task::Identify { problem: preset_of(preset).problem() },
        },
    };
    let mut cfg = RunConfig {
        seed: common.seed.or(stored.as_ref().map(|c| c.seed)).unwrap_or(bee_ident::benchmarks::BENCH_SEED),
        workers: common.workers.or(stored.as_ref().map(|c| c.workers)).unwrap_or(1).max(1),
        out: common.out.or(stored.map(|c| c.out)).unwrap_or_else(|| PathBuf::from("bee-ident-out")),
        task,
    };
    cfg.apply_overrides(&common.overrides)?;
    cfg.normalize();
    Ok(cfg)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bench { .. } => "bench",
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Scan { .. } => "scan",
            Command::Identify { .. } => "identify",
        }
    }
}

fn parse_fixed(text: &str) -> Result<Option<FixedParam>> {
    if text.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let (name, value) = text.split_once('=').ok_or_else(|| anyhow!("--fix expects name=value, got '{text}'"))?;
    let name: ParamName = name.parse().map_err(|e| anyhow!("{e}"))?;
    let value: f64 = value.parse().map_err(|_| anyhow!("--fix value '{value}' is not a number"))?;
    Ok(Some(FixedParam { name, value }))
}

fn parse_grid(text: &str) -> Result<[usize; 2]> {
    let (a, b) = text
        .to_ascii_lowercase()
        .split_once('x')
        .map(|(a, b)| (a.trim().parse::<usize>(), b.trim().parse::<usize>()))
        .ok_or_else(|| anyhow!("--grid expects N1xN2, got '{text}'"))?;
    match (a, b) {
        (Ok(a), Ok(b)) => Ok([a, b]),
        _ => Err(anyhow!("--grid expects N1xN2, got '{text}'")),
    }
}
