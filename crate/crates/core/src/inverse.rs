//! Identification of isotherm parameters from a breakthrough curve.
//!
//! The residual functional is `J = sum_i (c_out(t_i) - c_ref(t_i))^2 dt` on the
//! recording grid of the direct solver (left rectangle rule). Candidates and
//! the reference must share that grid exactly; nothing is interpolated.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::fmt_f64;
use crate::mbc::{self, Evaluator, MbcConfig, MbcError, MbcResult, Objective, ObjectiveError, RunOptions, SearchDomain};
use crate::transport::{simulate, BreakthroughCurve, CurveError, Isotherm, TransportError, TransportParams};

/// Relative tolerance when matching reference times to the solver grid.
const CADENCE_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InverseError {
    #[error("invalid identification problem: {0}")]
    Invalid(String),
    #[error("reference cadence mismatch: {0}")]
    Cadence(String),
    #[error("candidate {point:?} lies outside the bounds")]
    OutOfBounds { point: Vec<f64> },
    #[error("simulation failed at {point:?}: {source}")]
    Simulation {
        point: Vec<f64>,
        #[source]
        source: TransportError,
    },
    #[error("reference curve has zero norm")]
    ZeroReference,
    #[error("curves differ in length: {0} vs {1}")]
    Length(usize, usize),
    #[error(transparent)]
    Mbc(#[from] MbcError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

/// Identifiable parameters, in the order they appear in a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    DaA,
    DaD,
    MCap,
}

impl ParamName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DaA => "da_a",
            Self::DaD => "da_d",
            Self::MCap => "m_cap",
        }
    }

    /// Parameter names for an isotherm, in point order.
    pub fn for_isotherm(isotherm: Isotherm) -> &'static [ParamName] {
        match isotherm {
            Isotherm::Henry => &[Self::DaA, Self::DaD],
            Isotherm::Langmuir => &[Self::DaA, Self::DaD, Self::MCap],
        }
    }
}

impl std::fmt::Display for ParamName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "da_a" => Ok(Self::DaA),
            "da_d" => Ok(Self::DaD),
            "m_cap" | "m" => Ok(Self::MCap),
            other => Err(format!("unknown parameter '{other}' (expected da_a, da_d or m_cap)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { params: TransportParams, seed: u64, sigma: f64 },
    External { path: String },
}

/// Measured or synthetic breakthrough curve to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    pub curve: BreakthroughCurve,
    pub provenance: Provenance,
}

impl ReferenceCurve {
    /// Simulate `params` and perturb the curve with `add_noise`.
    pub fn synthetic(params: &TransportParams, sigma: f64, seed: u64) -> Result<Self, InverseError> {
        let (clean, _) = simulate(params).map_err(|source| InverseError::Simulation {
            point: Vec::new(),
            source,
        })?;
        Ok(Self {
            curve: add_noise(&clean, sigma, seed)?,
            provenance: Provenance::Synthetic { params: params.clone(), seed, sigma },
        })
    }

    /// Load a `t,c_out` CSV file.
    pub fn from_file(path: &Path) -> Result<Self, InverseError> {
        let text = std::fs::read_to_string(path).map_err(|e| InverseError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            curve: BreakthroughCurve::from_csv(&text)?,
            provenance: Provenance::External { path: path.display().to_string() },
        })
    }

    /// The reference must sit exactly on the grid `dt, 2 dt, ..., steps * dt`
    /// of `sim`.
    pub fn check_cadence(&self, sim: &TransportParams) -> Result<(), InverseError> {
        self.curve.validate()?;
        let steps = sim.steps();
        if self.curve.len() != steps {
            return Err(InverseError::Cadence(format!(
                "reference has {} samples, simulation records {steps}",
                self.curve.len()
            )));
        }
        for (k, &t) in self.curve.times.iter().enumerate() {
            let expected = sim.dt * (k + 1) as f64;
            if (t - expected).abs() > CADENCE_TOL * expected.max(1.0) {
                return Err(InverseError::Cadence(format!(
                    "sample {k} at t = {t}, expected {expected} (dt = {}); resampling is not supported",
                    sim.dt
                )));
            }
        }
        Ok(())
    }
}

/// Everything needed to fit isotherm parameters to one reference curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationProblem {
    pub reference: ReferenceCurve,
    pub isotherm: Isotherm,
    /// Box over `(da_a, da_d)` or `(da_a, da_d, m_cap)`.
    pub bounds: SearchDomain,
    pub fixed_pe: f64,
    /// Grid, horizon and remaining physics; `pe`, `isotherm` and the
    /// identified parameters are overwritten per candidate.
    pub sim: TransportParams,
    pub mbc: MbcConfig,
}

impl IdentificationProblem {
    pub fn validate(&self) -> Result<(), InverseError> {
        SearchDomain::new(self.bounds.lo().to_vec(), self.bounds.hi().to_vec())?;
        let names = self.names();
        if self.bounds.dims() != names.len() {
            return Err(InverseError::Invalid(format!(
                "{:?} needs {} bounds, got {}",
                self.isotherm,
                names.len(),
                self.bounds.dims()
            )));
        }
        if !(self.fixed_pe.is_finite() && self.fixed_pe > 0.0) {
            return Err(InverseError::Invalid(format!("fixed_pe must be positive, got {}", self.fixed_pe)));
        }
        let template = self.template();
        template.validate().map_err(|e| InverseError::Invalid(e.to_string()))?;
        self.reference.check_cadence(&template)?;
        self.mbc.validate(self.bounds.dims())?;
        Ok(())
    }

    pub fn names(&self) -> &'static [ParamName] {
        ParamName::for_isotherm(self.isotherm)
    }

    fn template(&self) -> TransportParams {
        TransportParams { pe: self.fixed_pe, isotherm: self.isotherm, ..self.sim.clone() }
    }

    /// Direct-problem parameters at a parameter point.
    pub fn params_at(&self, point: &[f64]) -> TransportParams {
        let mut p = self.template();
        for (name, &v) in self.names().iter().zip(point) {
            match name {
                ParamName::DaA => p.da_a = v,
                ParamName::DaD => p.da_d = v,
                ParamName::MCap => p.m_cap = v,
            }
        }
        p
    }

    /// Breakthrough curve at a parameter point.
    pub fn curve_at(&self, point: &[f64]) -> Result<BreakthroughCurve, InverseError> {
        simulate(&self.params_at(point))
            .map(|(curve, _)| curve)
            .map_err(|source| InverseError::Simulation { point: point.to_vec(), source })
    }
}

/// `sum_i (a_i - b_i)^2 dt` over a shared grid.
pub fn curve_residual(curve: &BreakthroughCurve, reference: &BreakthroughCurve, dt: f64) -> Result<f64, InverseError> {
    if curve.len() != reference.len() {
        return Err(InverseError::Length(curve.len(), reference.len()));
    }
    Ok(curve.values.iter().zip(&reference.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * dt)
}

/// Residual functional `J` at a candidate point.
pub fn residual_j(candidate: &[f64], problem: &IdentificationProblem) -> Result<f64, InverseError> {
    if candidate.len() != problem.bounds.dims() || !problem.bounds.contains(candidate) {
        return Err(InverseError::OutOfBounds { point: candidate.to_vec() });
    }
    let curve = problem.curve_at(candidate)?;
    curve_residual(&curve, &problem.reference.curve, problem.sim.dt)
}

/// Discrete relative L2 error `||curve - reference|| / ||reference||`.
pub fn relative_error(curve: &BreakthroughCurve, reference: &BreakthroughCurve) -> Result<f64, InverseError> {
    if curve.len() != reference.len() {
        return Err(InverseError::Length(curve.len(), reference.len()));
    }
    let norm: f64 = reference.values.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(InverseError::ZeroReference);
    }
    let diff: f64 = curve.values.iter().zip(&reference.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((diff / norm).sqrt())
}

/// Add independent zero-mean Gaussian noise of standard deviation `sigma`
/// to every value and clamp the result at zero.
pub fn add_noise(curve: &BreakthroughCurve, sigma: f64, seed: u64) -> Result<BreakthroughCurve, InverseError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(InverseError::Invalid(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(curve.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| InverseError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = curve.values.iter().map(|v| (v + normal.sample(&mut rng)).max(0.0)).collect();
    Ok(BreakthroughCurve { times: curve.times.clone(), values })
}

/// `residual_j` as an optimizer objective, counting direct simulations.
pub struct ResidualObjective<'a> {
    problem: &'a IdentificationProblem,
    simulations: AtomicUsize,
}

impl<'a> ResidualObjective<'a> {
    pub fn new(problem: &'a IdentificationProblem) -> Self {
        Self { problem, simulations: AtomicUsize::new(0) }
    }

    pub fn simulations(&self) -> usize {
        self.simulations.load(Ordering::Relaxed)
    }
}

impl Objective for ResidualObjective<'_> {
    fn evaluate(&self, point: &[f64]) -> Result<f64, ObjectiveError> {
        self.simulations.fetch_add(1, Ordering::Relaxed);
        residual_j(point, self.problem).map_err(Into::into)
    }
}

/// One fixed coordinate of a reduced scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParam {
    pub name: ParamName,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub i: usize,
    pub j: usize,
    /// Full parameter point, fixed coordinate included.
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub i: usize,
    pub j: usize,
    pub point: Vec<f64>,
    pub message: String,
}

/// `J` on a uniform tensor grid over two free parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridScan {
    pub free: [ParamName; 2],
    pub fixed: Option<FixedParam>,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major over `(axis1, axis2)`; `None` where the simulation failed.
    #[serde(skip)]
    pub values: Vec<Option<f64>>,
    pub argmin: Option<ScanCell>,
    pub failures: Vec<ScanFailure>,
    pub evaluations: usize,
}

impl GridScan {
    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.len(), self.axis2.len())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.axis2.len() + j]
    }

    /// CSV `p1,p2,J`, one row per cell; failed cells carry `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p1,p2,J\n");
        for (i, a) in self.axis1.iter().enumerate() {
            for (j, b) in self.axis2.iter().enumerate() {
                let v = self.get(i, j).map_or_else(|| "NaN".to_string(), fmt_f64);
                out.push_str(&format!("{},{},{v}\n", fmt_f64(*a), fmt_f64(*b)));
            }
        }
        out
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

/// Evaluate `J` on an `n1 x n2` grid spanning the bounds of the two free
/// parameters. Langmuir problems need exactly one fixed parameter, Henry
/// problems none. Failed simulations become missing cells.
pub fn grid_scan(
    problem: &IdentificationProblem,
    fixed: Option<FixedParam>,
    grid: (usize, usize),
    evaluator: &Evaluator,
) -> Result<GridScan, InverseError> {
    problem.validate()?;
    let objective = |p: &[f64]| residual_j(p, problem);
    scan_with(problem.names(), &problem.bounds, fixed, grid, evaluator, &objective)
}

/// Grid scan over an arbitrary objective; `grid_scan` is the `J` instance.
pub fn scan_with<F>(
    names: &[ParamName],
    bounds: &SearchDomain,
    fixed: Option<FixedParam>,
    (n1, n2): (usize, usize),
    evaluator: &Evaluator,
    objective: &F,
) -> Result<GridScan, InverseError>
where
    F: Fn(&[f64]) -> Result<f64, InverseError> + Sync,
{
    if n1 < 2 || n2 < 2 {
        return Err(InverseError::Invalid(format!("grid must be at least 2 x 2, got {n1} x {n2}")));
    }
    let fixed_axis = match (names.len(), fixed) {
        (2, None) => None,
        (3, Some(f)) => match names.iter().position(|n| *n == f.name) {
            Some(k) => Some(k),
            None => return Err(InverseError::Invalid(format!("unknown fixed parameter {}", f.name))),
        },
        (2, Some(f)) => {
            return Err(InverseError::Invalid(format!(
                "two-parameter problems scan both parameters; cannot fix {}",
                f.name
            )))
        }
        _ => return Err(InverseError::Invalid("three-parameter scans need exactly one fixed parameter".into())),
    };
    if let (Some(k), Some(f)) = (fixed_axis, fixed) {
        if !(f.value >= bounds.lo()[k] && f.value <= bounds.hi()[k]) {
            return Err(InverseError::Invalid(format!(
                "fixed {} = {} lies outside [{}, {}]",
                f.name,
                f.value,
                bounds.lo()[k],
                bounds.hi()[k]
            )));
        }
    }
    let free: Vec<usize> = (0..names.len()).filter(|k| Some(*k) != fixed_axis).collect();
    let (f1, f2) = (free[0], free[1]);
    let axis1 = axis(bounds.lo()[f1], bounds.hi()[f1], n1);
    let axis2 = axis(bounds.lo()[f2], bounds.hi()[f2], n2);
    let point = |i: usize, j: usize| {
        let mut p = vec![0.0; names.len()];
        p[f1] = axis1[i];
        p[f2] = axis2[j];
        if let (Some(k), Some(f)) = (fixed_axis, fixed) {
            p[k] = f.value;
        }
        p
    };

    let raw = evaluator.map(n1 * n2, |idx| objective(&point(idx / n2, idx % n2)));
    let mut values = Vec::with_capacity(raw.len());
    let mut failures = Vec::new();
    let mut argmin: Option<ScanCell> = None;
    for (idx, r) in raw.into_iter().enumerate() {
        let (i, j) = (idx / n2, idx % n2);
        match r {
            Ok(v) if v.is_finite() => {
                if argmin.as_ref().is_none_or(|c| v < c.value) {
                    argmin = Some(ScanCell { i, j, point: point(i, j), value: v });
                }
                values.push(Some(v));
            }
            Ok(v) => {
                failures.push(ScanFailure { i, j, point: point(i, j), message: format!("non-finite J {v}") });
                values.push(None);
            }
            Err(e) => {
                failures.push(ScanFailure { i, j, point: point(i, j), message: e.to_string() });
                values.push(None);
            }
        }
    }
    Ok(GridScan {
        free: [names[f1], names[f2]],
        fixed,
        axis1,
        axis2,
        values,
        argmin,
        failures,
        evaluations: n1 * n2,
    })
}

/// One found extremum with the relative error of its curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiedExtremum {
    #[serde(flatten)]
    pub extremum: mbc::Extremum,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Identification {
    pub extrema: Vec<IdentifiedExtremum>,
    /// Direct simulations requested by the optimizer (equals its NFE).
    pub nfe: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub result: MbcResult,
}

impl Identification {
    pub fn best(&self) -> &IdentifiedExtremum {
        &self.extrema[0]
    }
}

/// Minimize `J` over the bounds with the problem's MBC configuration, then
/// report every extremum with the relative error of its curve.
pub fn identify(problem: &IdentificationProblem, options: RunOptions<'_>) -> Result<Identification, InverseError> {
    problem.validate()?;
    let objective = ResidualObjective::new(problem);
    let result = mbc::run_with(&objective, &problem.bounds, &problem.mbc, options)?;
    debug_assert_eq!(objective.simulations(), result.nfe);
    let evaluator = Evaluator::with_workers(options.workers)?;
    let errors = evaluator.map(result.extrema.len(), |k| {
        let curve = problem.curve_at(&result.extrema[k].point)?;
        relative_error(&curve, &problem.reference.curve)
    });
    let extrema = result
        .extrema
        .iter()
        .zip(errors)
        .map(|(e, r)| Ok(IdentifiedExtremum { extremum: e.clone(), relative_error: r? }))
        .collect::<Result<Vec<_>, InverseError>>()?;
    Ok(Identification { extrema, nfe: objective.simulations(), iterations: result.iterations, result })
}

#[cfg(test)]
mod tests;
