//! Command execution and result files.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use bee_ident::benchmarks::{self, MinimumMatch};
use bee_ident::fmt_f64;
use bee_ident::inverse::{self, FixedParam, IdentificationProblem, InverseError};
use bee_ident::mbc::{self, Evaluator, Extremum, MbcConfig, MbcError, RunOptions, TraceRow};
use bee_ident::transport::{mass_audit, BreakthroughCurve, FieldState, Solver, TransportParams};
use serde::Serialize;

use crate::config::{BenchRun, ProblemSpec, RunConfig, Task};
use crate::Failure;

const COORD_TOL: f64 = 0.05;
const VALUE_TOL: f64 = 0.01;
/// Snapshot times must hit a recorded step to this relative precision.
const SNAPSHOT_TOL: f64 = 1e-9;

type Outcome<T> = Result<T, Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Configuration problems are usage errors; everything raised while
/// simulating or optimizing is a runtime failure.
fn classify(e: InverseError) -> Failure {
    match e {
        InverseError::Invalid(_)
        | InverseError::Cadence(_)
        | InverseError::Curve(_)
        | InverseError::Io { .. }
        | InverseError::Mbc(MbcError::InvalidConfig(_) | MbcError::InvalidDomain(_)) => usage(e),
        _ => runtime(e),
    }
}

/// Collected result files, written once the computation has finished.
#[derive(Default)]
struct Files(Vec<(String, String)>);

impl Files {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.0.push((name.into(), contents));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.add(name, s);
    }

    fn write(self, dir: &Path) -> anyhow::Result<()> {
        for (name, contents) in self.0 {
            let path = dir.join(name);
            std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

struct Progress {
    quiet: bool,
}

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn iteration(&self, row: &TraceRow) {
        if !self.quiet {
            eprintln!("  region {} iter {:>4}  J = {:.6e}", row.region, row.iteration, row.value);
        }
    }
}

/// Run the configured command. `Ok(false)` means the command ran but its
/// success check failed (only `bench` has one).
pub fn execute(cfg: &RunConfig, quiet: bool) -> Outcome<bool> {
    let progress = Progress { quiet };
    let mut files = Files::default();
    let ok = match &cfg.task {
        Task::Bench { runs } => bench(runs, cfg.workers, &progress, &mut files)?,
        Task::Simulate { transport, snapshots } => {
            simulate(transport, snapshots, &progress, &mut files)?;
            true
        }
        Task::Sweep { transport, parameter, values } => {
            sweep(transport, parameter, values, &progress, &mut files)?;
            true
        }
        Task::Scan { problem, fixed, grid } => {
            scan(problem, *fixed, *grid, cfg, &progress, &mut files)?;
            true
        }
        Task::Identify { problem } => {
            identify(problem, cfg, &progress, &mut files)?;
            true
        }
    };
    files.add("run_config.json", cfg.to_json());
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))
        .map_err(runtime)?;
    files.write(&cfg.out).map_err(runtime)?;
    progress.say(format!("results in {}", cfg.out.display()));
    Ok(ok)
}

#[derive(Serialize)]
struct BenchReport<'a> {
    name: &'a str,
    mbc: &'a MbcConfig,
    nfe: usize,
    iterations: usize,
    extrema: &'a [Extremum],
    minima: Vec<MinimumMatch>,
    recovered: bool,
}

fn bench(runs: &[BenchRun], workers: usize, progress: &Progress, files: &mut Files) -> Outcome<bool> {
    if runs.is_empty() {
        return Err(usage(anyhow!("no benchmarks selected")));
    }
    let specs = runs
        .iter()
        .map(|r| {
            let spec = benchmarks::lookup(&r.name).ok_or_else(|| usage(anyhow!("unknown benchmark '{}'", r.name)))?;
            r.mbc.validate(spec.dims).map_err(usage)?;
            Ok(spec)
        })
        .collect::<Outcome<Vec<_>>>()?;

    let hook = |row: &TraceRow| progress.iteration(row);
    let mut results = Vec::new();
    for (run, spec) in runs.iter().zip(&specs) {
        progress.say(format!("bench {}", spec.name));
        let objective = |p: &[f64]| spec.eval(p);
        let options = RunOptions { workers, on_iteration: Some(&hook) };
        let result = mbc::run_with(&objective, &spec.domain, &run.mbc, options).map_err(runtime)?;
        results.push(result);
    }

    let mut reports = Vec::new();
    let mut table = String::new();
    let _ = writeln!(table, "{:<12} {:>6} {:>6} {:>10}  best", "benchmark", "nfe", "iter", "recovered");
    for ((run, spec), result) in runs.iter().zip(&specs).zip(&results) {
        let minima = spec.match_minima(&result.extrema, COORD_TOL, VALUE_TOL);
        let recovered = spec.recovered(&minima);
        let best = result.best();
        let _ = writeln!(
            table,
            "{:<12} {:>6} {:>6} {:>10}  f({}) = {}",
            spec.name,
            result.nfe,
            result.iterations,
            if recovered { "yes" } else { "no" },
            join(&best.point),
            fmt_f64(best.value)
        );
        files.add(format!("bench_{}_trace.csv", spec.name), result.trace_csv());
        reports.push(BenchReport {
            name: spec.name,
            mbc: &run.mbc,
            nfe: result.nfe,
            iterations: result.iterations,
            extrema: &result.extrema,
            minima,
            recovered,
        });
    }
    print!("{table}");
    let all = reports.iter().all(|r| r.recovered);
    files.json("bench.json", &reports);
    Ok(all)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    transport: &'a TransportParams,
    steps: usize,
    final_c_out: f64,
    mass_audit: f64,
    snapshots: &'a [f64],
}

fn snapshot_steps(params: &TransportParams, times: &[f64]) -> Outcome<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let k = (t / params.dt).round();
            let ok = t.is_finite()
                && k >= 0.0
                && (k as usize) <= params.steps()
                && (k * params.dt - t).abs() <= SNAPSHOT_TOL * t.abs().max(1.0);
            if ok {
                Ok(k as usize)
            } else {
                Err(usage(anyhow!(
                    "snapshot time {t} is not a recorded time (multiples of dt = {} up to {})",
                    params.dt,
                    params.dt * params.steps() as f64
                )))
            }
        })
        .collect()
}

fn simulate(params: &TransportParams, snapshots: &[f64], progress: &Progress, files: &mut Files) -> Outcome<()> {
    params.validate().map_err(usage)?;
    let wanted = snapshot_steps(params, snapshots)?;
    progress.say(format!("simulate: {} steps of dt = {}", params.steps(), params.dt));
    let mut solver = Solver::new(params).map_err(runtime)?;
    let mut history: Vec<FieldState> = Vec::new();
    let mut taken: Vec<Option<FieldState>> = vec![None; wanted.len()];
    let (curve, _) = solver
        .run(|s| {
            history.push(s.clone());
            for (slot, &k) in taken.iter_mut().zip(&wanted) {
                if s.step == k && (k > 0 || s.substep == 0) {
                    *slot = Some(s.clone());
                }
            }
        })
        .map_err(runtime)?;
    let audit = mass_audit(&history, params);

    files.add("breakthrough.csv", curve.to_csv());
    for (t, state) in snapshots.iter().zip(taken) {
        let state = state.expect("snapshot steps are validated");
        files.add(format!("snapshot_t{t}_field.csv"), state.field_csv(params));
        files.add(format!("snapshot_t{t}_wall.csv"), state.wall_csv(params));
    }
    files.json(
        "simulate.json",
        &SimulateSummary {
            transport: params,
            steps: curve.len(),
            final_c_out: curve.values.last().copied().unwrap_or(0.0),
            mass_audit: audit,
            snapshots,
        },
    );
    progress.say(format!("mass audit residual {audit:.3e}"));
    Ok(())
}

fn sweep(base: &TransportParams, parameter: &str, values: &[f64], progress: &Progress, files: &mut Files) -> Outcome<()> {
    if values.is_empty() {
        return Err(usage(anyhow!("sweep needs at least one value")));
    }
    let family = values
        .iter()
        .map(|&v| {
            let mut p = base.clone();
            p.set_named(parameter, v).map_err(usage)?;
            p.validate().map_err(usage)?;
            Ok(p)
        })
        .collect::<Outcome<Vec<_>>>()?;

    let mut curves: Vec<BreakthroughCurve> = Vec::new();
    for (p, v) in family.iter().zip(values) {
        progress.say(format!("sweep {parameter} = {v}"));
        let (curve, _) = bee_ident::transport::simulate(p).map_err(|e| runtime(anyhow!("{parameter} = {v}: {e}")))?;
        curves.push(curve);
    }

    let mut combined = String::from("t");
    for v in values {
        let _ = write!(combined, ",{parameter}={v}");
    }
    combined.push('\n');
    for (k, t) in curves[0].times.iter().enumerate() {
        combined.push_str(&fmt_f64(*t));
        for c in &curves {
            combined.push(',');
            combined.push_str(&fmt_f64(c.values[k]));
        }
        combined.push('\n');
    }
    for (k, c) in curves.iter().enumerate() {
        files.add(format!("sweep_{parameter}_{k}.csv"), c.to_csv());
    }
    files.add(format!("sweep_{parameter}.csv"), combined);
    Ok(())
}

fn build_problem(spec: &ProblemSpec, seed: u64) -> Outcome<IdentificationProblem> {
    let problem = spec.build(seed).map_err(|e| match e.downcast::<InverseError>() {
        Ok(inner) => classify(inner),
        Err(other) => usage(other),
    })?;
    problem.validate().map_err(classify)?;
    Ok(problem)
}

fn scan(
    spec: &ProblemSpec,
    fixed: Option<FixedParam>,
    grid: [usize; 2],
    cfg: &RunConfig,
    progress: &Progress,
    files: &mut Files,
) -> Outcome<()> {
    let problem = build_problem(spec, cfg.seed)?;
    let evaluator = Evaluator::with_workers(cfg.workers).map_err(usage)?;
    progress.say(format!("scan: {} x {} cells on {} worker(s)", grid[0], grid[1], evaluator.workers()));
    let scan = inverse::grid_scan(&problem, fixed, (grid[0], grid[1]), &evaluator).map_err(classify)?;
    if !scan.failures.is_empty() {
        progress.say(format!("{} cell(s) failed and are left as gaps", scan.failures.len()));
    }
    if let Some(best) = &scan.argmin {
        println!("argmin cell ({}, {}) at [{}], J = {}", best.i, best.j, join(&best.point), fmt_f64(best.value));
    }
    files.add("scan.csv", scan.to_csv());
    files.json("scan.json", &scan);
    Ok(())
}

#[derive(Serialize)]
struct IdentifyReport<'a> {
    isotherm: bee_ident::transport::Isotherm,
    parameters: Vec<&'static str>,
    bounds: &'a mbc::SearchDomain,
    mbc: &'a MbcConfig,
    nfe: usize,
    iterations: usize,
    extrema: &'a [inverse::IdentifiedExtremum],
}

fn identify(spec: &ProblemSpec, cfg: &RunConfig, progress: &Progress, files: &mut Files) -> Outcome<()> {
    let problem = build_problem(spec, cfg.seed)?;
    let hook = |row: &TraceRow| progress.iteration(row);
    progress.say(format!("identify: {} parameters", problem.names().len()));
    let found = inverse::identify(&problem, RunOptions { workers: cfg.workers, on_iteration: Some(&hook) })
        .map_err(classify)?;

    let names: Vec<&'static str> = problem.names().iter().map(|n| n.as_str()).collect();
    let mut table = String::new();
    let _ = writeln!(table, "nfe {}  iterations {}", found.nfe, found.iterations);
    let _ = write!(table, "{:>4} {:<12}", "rank", "kind");
    for n in &names {
        let _ = write!(table, " {n:>14}");
    }
    let _ = writeln!(table, " {:>14} {:>10} {:>9}", "J", "E_rel [%]", "converged");
    for (rank, e) in found.extrema.iter().enumerate() {
        let x = &e.extremum;
        let _ = write!(table, "{:>4} {:<12}", rank + 1, format!("{:?}", x.kind).to_lowercase());
        for v in &x.point {
            let _ = write!(table, " {v:>14.6}");
        }
        let _ = writeln!(table, " {:>14.6e} {:>10.4} {:>9}", x.value, 100.0 * e.relative_error, x.converged);
    }
    print!("{table}");

    files.json(
        "identify.json",
        &IdentifyReport {
            isotherm: problem.isotherm,
            parameters: names,
            bounds: &problem.bounds,
            mbc: &problem.mbc,
            nfe: found.nfe,
            iterations: found.iterations,
            extrema: &found.extrema,
        },
    );
    files.add("identify_trace.csv", found.result.trace_csv());
    Ok(())
}
