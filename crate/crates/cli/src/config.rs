//! Replayable run configuration: one JSON document per run.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use bee_ident::benchmarks::{self, BENCH_SEED};
use bee_ident::inverse::{FixedParam, IdentificationProblem, ParamName, Provenance, ReferenceCurve};
use bee_ident::mbc::{MbcConfig, SearchDomain};
use bee_ident::transport::{BreakthroughCurve, Isotherm, TransportParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Drives every random stream of the run: MBC sampling and synthetic noise.
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Bench { runs: Vec<BenchRun> },
    Simulate { transport: TransportParams, snapshots: Vec<f64> },
    Sweep { transport: TransportParams, parameter: String, values: Vec<f64> },
    Scan { problem: ProblemSpec, fixed: Option<FixedParam>, grid: [usize; 2] },
    Identify { problem: ProblemSpec },
}

impl Task {
    pub fn command(&self) -> &'static str {
        match self {
            Task::Bench { .. } => "bench",
            Task::Simulate { .. } => "simulate",
            Task::Sweep { .. } => "sweep",
            Task::Scan { .. } => "scan",
            Task::Identify { .. } => "identify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRun {
    pub name: String,
    pub mbc: MbcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Simulate the template at `truth` and add Gaussian noise seeded by the
    /// run seed.
    Synthetic { truth: Vec<f64>, sigma: f64 },
    File { path: PathBuf },
}

/// Identification problem with the reference given by recipe instead of data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub isotherm: Isotherm,
    pub sim: TransportParams,
    pub reference: ReferenceSpec,
    pub bounds: SearchDomain,
    pub fixed_pe: f64,
    pub mbc: MbcConfig,
}

impl ProblemSpec {
    pub fn build(&self, seed: u64) -> Result<IdentificationProblem> {
        let mut problem = IdentificationProblem {
            reference: ReferenceCurve {
                curve: BreakthroughCurve { times: Vec::new(), values: Vec::new() },
                provenance: Provenance::External { path: String::new() },
            },
            isotherm: self.isotherm,
            bounds: self.bounds.clone(),
            fixed_pe: self.fixed_pe,
            sim: self.sim.clone(),
            mbc: MbcConfig { seed, ..self.mbc.clone() },
        };
        problem.reference = match &self.reference {
            ReferenceSpec::Synthetic { truth, sigma } => {
                let names = problem.names();
                if truth.len() != names.len() {
                    bail!("truth has {} entries, {} isotherm needs {}", truth.len(), self.isotherm_name(), names.len());
                }
                ReferenceCurve::synthetic(&problem.params_at(truth), *sigma, seed)?
            }
            ReferenceSpec::File { path } => ReferenceCurve::from_file(path)?,
        };
        Ok(problem)
    }

    fn isotherm_name(&self) -> &'static str {
        match self.isotherm {
            Isotherm::Henry => "henry",
            Isotherm::Langmuir => "langmuir",
        }
    }
}

/// Named starting points for the transport and identification commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Diffusion-dominated Henry case.
    Henry,
    /// Reaction-dominated Langmuir case; identification uses the large
    /// configuration (n=2, m=5, sb=200, abb=50, abp=40, stop_fail=5).
    Langmuir,
    /// Reaction-dominated Langmuir case with the small identification
    /// configuration (n=1, m=2, sb=20, abb=20, abp=5, stop_fail=3).
    LangmuirSmall,
}

impl Preset {
    pub fn transport(self) -> TransportParams {
        match self {
            Preset::Henry => TransportParams::henry_reference(),
            Preset::Langmuir | Preset::LangmuirSmall => TransportParams::langmuir_reference(),
        }
    }

    pub fn problem(self) -> ProblemSpec {
        match self {
            Preset::Henry => ProblemSpec {
                isotherm: Isotherm::Henry,
                sim: self.transport(),
                reference: ReferenceSpec::Synthetic { truth: vec![0.005, 0.05], sigma: 0.0 },
                bounds: SearchDomain::new(vec![0.0, 0.0], vec![0.01, 0.1]).expect("static bounds"),
                fixed_pe: 10.0,
                mbc: MbcConfig {
                    n_best: 2,
                    m_persp: 3,
                    half_widths: vec![0.0002, 0.002],
                    delta: 0.002,
                    sb: 20,
                    abb: 20,
                    abp: 10,
                    stop_fail: 3,
                    epsilon: 1e-8,
                    max_iter: 200,
                    seed: BENCH_SEED,
                },
            },
            Preset::Langmuir | Preset::LangmuirSmall => {
                let large = self == Preset::Langmuir;
                ProblemSpec {
                    isotherm: Isotherm::Langmuir,
                    sim: self.transport(),
                    reference: ReferenceSpec::Synthetic { truth: vec![100.0, 1.0, 1000.0], sigma: 0.0 },
                    bounds: SearchDomain::new(vec![60.0, 0.0, 800.0], vec![140.0, 2.0, 1200.0])
                        .expect("static bounds"),
                    fixed_pe: 10.0,
                    mbc: MbcConfig {
                        n_best: if large { 2 } else { 1 },
                        m_persp: if large { 5 } else { 2 },
                        half_widths: vec![1.5, 0.015, 5.0],
                        delta: 1.0,
                        sb: if large { 200 } else { 20 },
                        abb: if large { 50 } else { 20 },
                        abp: if large { 40 } else { 5 },
                        stop_fail: if large { 5 } else { 3 },
                        epsilon: 1e-8,
                        max_iter: 100,
                        seed: BENCH_SEED,
                    },
                }
            }
        }
    }

    /// Scans of Langmuir problems fix the capacity at its reference value.
    pub fn scan_fixed(self) -> Option<FixedParam> {
        match self {
            Preset::Henry => None,
            Preset::Langmuir | Preset::LangmuirSmall => Some(FixedParam { name: ParamName::MCap, value: 1000.0 }),
        }
    }
}

pub fn bench_runs(names: &[String]) -> Result<Vec<BenchRun>> {
    let specs = if names.is_empty() || names.iter().any(|n| n.eq_ignore_ascii_case("all")) {
        benchmarks::registry()
    } else {
        names
            .iter()
            .map(|n| benchmarks::lookup(n).ok_or_else(|| anyhow!("unknown benchmark '{n}'")))
            .collect::<Result<_>>()?
    };
    Ok(specs.into_iter().map(|b| BenchRun { name: b.name.to_string(), mbc: b.default_config() }).collect())
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Apply `path=value` overrides to the task block. Paths are dotted keys
    /// below the command, e.g. `transport.dt=5` or `problem.mbc.max_iter=10`;
    /// for `bench`, `mbc.<key>` applies to every benchmark. Values are parsed
    /// as JSON, falling back to a plain string.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut task = serde_json::to_value(&self.task)?;
        for item in overrides {
            let (path, raw) = item.split_once('=').ok_or_else(|| anyhow!("override '{item}' is not key=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let keys: Vec<&str> = path.split('.').collect();
            if let (Task::Bench { .. }, Some(("mbc", rest))) = (&self.task, keys.split_first().map(|(a, b)| (*a, b))) {
                let runs = task["runs"].as_array_mut().expect("bench runs");
                for run in runs {
                    set_path(&mut run["mbc"], rest, value.clone(), path)?;
                }
            } else {
                set_path(&mut task, &keys, value, path)?;
            }
        }
        self.task = serde_json::from_value(task).context("applying overrides")?;
        Ok(())
    }

    /// Make every embedded MBC seed agree with the run seed.
    pub fn normalize(&mut self) {
        let seed = self.seed;
        match &mut self.task {
            Task::Bench { runs } => runs.iter_mut().for_each(|r| r.mbc.seed = seed),
            Task::Scan { problem, .. } | Task::Identify { problem } => problem.mbc.seed = seed,
            Task::Simulate { .. } | Task::Sweep { .. } => {}
        }
    }
}

fn set_path(node: &mut Value, keys: &[&str], value: Value, full: &str) -> Result<()> {
    let Some((first, rest)) = keys.split_first() else {
        *node = value;
        return Ok(());
    };
    let child = match node {
        Value::Object(map) => map.get_mut(*first),
        Value::Array(items) => first.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
        _ => None,
    };
    match child {
        Some(child) => set_path(child, rest, value, full),
        None => bail!("unknown override key '{full}'"),
    }
}
