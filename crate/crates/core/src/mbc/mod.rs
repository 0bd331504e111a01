//! Modified Bee Colony (MBC) optimizer.
//!
//! Scout bees sample the whole box, the sorted scouts are clustered into
//! non-overlapping regions, and each region is refined in turn by waves of
//! agent bees drawn from a box around the region's current extremum. After
//! `stop_fail` consecutive waves without a strict improvement the box is
//! shrunk to `half_widths / divider` (with `divider` growing 2, 4, 6, ...),
//! and the region stops once the extrema recorded at its last two shrink
//! events lie within `epsilon` of each other.
//!
//! Unlike the classic ABC scheme, regions are never abandoned, so every local
//! minimum that founded a region is reported.

mod config;
mod domain;
mod eval;

pub use config::MbcConfig;
pub use domain::{euclidean, SearchDomain};
pub use eval::{Evaluator, Objective, ObjectiveError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::fmt_f64;

#[derive(Debug, thiserror::Error)]
pub enum MbcError {
    #[error("invalid search domain: {0}")]
    InvalidDomain(String),
    #[error("invalid MBC configuration: {0}")]
    InvalidConfig(String),
    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("objective failed at {point:?}: {message}")]
    Objective { point: Vec<f64>, message: String },
    #[error("no regions could be formed from an empty scout set")]
    NoRegions,
}

/// A point together with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Best,
    Perspective,
}

/// Search state of one local area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Founding order, starting at 0.
    pub id: usize,
    pub kind: RegionKind,
    pub center: Vec<f64>,
    pub value: f64,
    pub initial_half_widths: Vec<f64>,
    pub cur_half_widths: Vec<f64>,
    pub fail_count: usize,
    pub divider: usize,
    /// Center recorded at every shrink event.
    pub shrink_history: Vec<Vec<f64>>,
    pub converged: bool,
    /// Agent waves dispatched in this region.
    pub iterations: usize,
}

impl Region {
    fn agents(&self, config: &MbcConfig) -> usize {
        match self.kind {
            RegionKind::Best => config.abb,
            RegionKind::Perspective => config.abp,
        }
    }

    fn shrink(&mut self) {
        self.fail_count = 0;
        self.divider += 2;
        let div = self.divider as f64;
        for (cur, init) in self.cur_half_widths.iter_mut().zip(&self.initial_half_widths) {
            *cur = init / div;
        }
        self.shrink_history.push(self.center.clone());
    }

    /// Distance between the extrema recorded at the last two shrink events.
    pub fn last_shrink_step(&self) -> Option<f64> {
        match self.shrink_history.as_slice() {
            [.., a, b] => Some(euclidean(a, b)),
            _ => None,
        }
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub region: usize,
    pub iteration: usize,
    pub value: f64,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub region: usize,
    pub kind: RegionKind,
    pub point: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub divider: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbcResult {
    /// Region extrema sorted ascending by value.
    pub extrema: Vec<Extremum>,
    pub nfe: usize,
    pub iterations: usize,
    pub per_region_trace: Vec<TraceRow>,
}

impl MbcResult {
    pub fn best(&self) -> &Extremum {
        &self.extrema[0]
    }

    /// Trace as CSV `region_id,iteration,value,center...`.
    pub fn trace_csv(&self) -> String {
        let dims = self.per_region_trace.first().map_or(0, |r| r.center.len());
        let mut out = String::from("region_id,iteration,value");
        for i in 0..dims {
            let _ = write!(out, ",center{i}");
        }
        out.push('\n');
        for row in &self.per_region_trace {
            let _ = write!(out, "{},{},{}", row.region, row.iteration, fmt_f64(row.value));
            for x in &row.center {
                let _ = write!(out, ",{}", fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Shared iteration counter, evaluation count and trace for one run.
#[derive(Debug, Clone, Default)]
pub struct Progress {
    pub iterations: usize,
    pub max_iter: usize,
    pub nfe: usize,
    pub trace: Vec<TraceRow>,
}

impl Progress {
    pub fn new(max_iter: usize) -> Self {
        Self { max_iter, ..Self::default() }
    }

    pub fn exhausted(&self) -> bool {
        self.iterations >= self.max_iter
    }
}

/// Hook called after every agent wave.
pub type IterationHook<'a> = &'a (dyn Fn(&TraceRow) + Sync);

#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub workers: usize,
    pub on_iteration: Option<IterationHook<'a>>,
}

/// Uniform draw from `center ± half_widths`, clamped into the domain.
pub fn sample_box<R: Rng + ?Sized>(
    center: &[f64],
    half_widths: &[f64],
    domain: &SearchDomain,
    rng: &mut R,
) -> Vec<f64> {
    let mut p: Vec<f64> = center
        .iter()
        .zip(half_widths)
        .map(|(c, h)| c + h * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    domain.clamp(&mut p);
    p
}

fn sample_domain<R: Rng + ?Sized>(domain: &SearchDomain, rng: &mut R) -> Vec<f64> {
    domain
        .lo()
        .iter()
        .zip(domain.hi())
        .map(|(l, h)| {
            let x = l + (h - l) * rng.gen::<f64>();
            x.min(*h)
        })
        .collect()
}

fn sort_ascending(samples: &mut [Sample]) {
    samples.sort_by(|a, b| a.value.total_cmp(&b.value));
}

/// Draw `sb` uniform scouts over the domain, evaluate, sort ascending.
pub fn scout_phase<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    domain: &SearchDomain,
    sb: usize,
    rng: &mut R,
    evaluator: &Evaluator,
) -> Result<Vec<Sample>, MbcError> {
    let points: Vec<Vec<f64>> = (0..sb).map(|_| sample_domain(domain, rng)).collect();
    let values = evaluator.evaluate(objective, &points)?;
    let mut scouts: Vec<Sample> = points
        .into_iter()
        .zip(values)
        .map(|(point, value)| Sample { point, value })
        .collect();
    sort_ascending(&mut scouts);
    Ok(scouts)
}

/// Cluster sorted scouts into at most `n_best + m_persp` regions.
///
/// A scout founds a region only when it is farther than `delta` from every
/// existing center; otherwise it is absorbed and discarded.
pub fn form_regions(
    scouts: &[Sample],
    delta: f64,
    n_best: usize,
    m_persp: usize,
    half_widths: &[f64],
) -> Result<Vec<Region>, MbcError> {
    if scouts.is_empty() {
        return Err(MbcError::NoRegions);
    }
    let cap = n_best + m_persp;
    let mut regions: Vec<Region> = Vec::with_capacity(cap);
    for scout in scouts {
        if regions.len() == cap {
            break;
        }
        if regions.iter().all(|r| euclidean(&r.center, &scout.point) > delta) {
            let id = regions.len();
            regions.push(Region {
                id,
                kind: if id < n_best { RegionKind::Best } else { RegionKind::Perspective },
                center: scout.point.clone(),
                value: scout.value,
                initial_half_widths: half_widths.to_vec(),
                cur_half_widths: half_widths.to_vec(),
                fail_count: 0,
                divider: 0,
                shrink_history: Vec::new(),
                converged: false,
                iterations: 0,
            });
        }
    }
    if regions.is_empty() {
        return Err(MbcError::NoRegions);
    }
    Ok(regions)
}

/// Refine one region until it converges or the global budget runs out.
#[allow(clippy::too_many_arguments)]
pub fn refine_region<O: Objective + ?Sized, R: Rng + ?Sized>(
    mut region: Region,
    objective: &O,
    domain: &SearchDomain,
    config: &MbcConfig,
    rng: &mut R,
    progress: &mut Progress,
    evaluator: &Evaluator,
    on_iteration: Option<IterationHook<'_>>,
) -> Result<Region, MbcError> {
    while !region.converged && !progress.exhausted() {
        progress.iterations += 1;
        region.iterations += 1;

        // all draws happen before dispatch so results do not depend on worker count
        let agents: Vec<Vec<f64>> = (0..region.agents(config))
            .map(|_| sample_box(&region.center, &region.cur_half_widths, domain, rng))
            .collect();
        let values = evaluator.evaluate(objective, &agents)?;
        progress.nfe += agents.len();

        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v));
        match best {
            Some((i, v)) if v < region.value => {
                region.center = agents[i].clone();
                region.value = v;
                region.fail_count = 0;
            }
            _ => region.fail_count += 1,
        }

        if region.fail_count == config.stop_fail {
            region.shrink();
            if region.last_shrink_step().is_some_and(|d| d <= config.epsilon) {
                region.converged = true;
            }
        }

        let row = TraceRow {
            region: region.id,
            iteration: progress.iterations,
            value: region.value,
            center: region.center.clone(),
        };
        if let Some(hook) = on_iteration {
            hook(&row);
        }
        progress.trace.push(row);
    }
    Ok(region)
}

/// Full MBC search: scouts, clustering, then refinement of every region in
/// founding order.
pub fn run<O: Objective + ?Sized>(
    objective: &O,
    domain: &SearchDomain,
    config: &MbcConfig,
) -> Result<MbcResult, MbcError> {
    run_with(objective, domain, config, RunOptions::default())
}

pub fn run_with<O: Objective + ?Sized>(
    objective: &O,
    domain: &SearchDomain,
    config: &MbcConfig,
    options: RunOptions<'_>,
) -> Result<MbcResult, MbcError> {
    config.validate(domain.dims())?;
    let evaluator = Evaluator::with_workers(options.workers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut progress = Progress::new(config.max_iter);

    let scouts = scout_phase(objective, domain, config.sb, &mut rng, &evaluator)?;
    progress.nfe += scouts.len();
    let regions = form_regions(&scouts, config.delta, config.n_best, config.m_persp, &config.half_widths)?;

    let mut refined = Vec::with_capacity(regions.len());
    for region in regions {
        let region = if progress.exhausted() {
            region
        } else {
            refine_region(
                region,
                objective,
                domain,
                config,
                &mut rng,
                &mut progress,
                &evaluator,
                options.on_iteration,
            )?
        };
        refined.push(region);
    }

    let mut extrema: Vec<Extremum> = refined
        .into_iter()
        .map(|r| Extremum {
            region: r.id,
            kind: r.kind,
            point: r.center,
            value: r.value,
            converged: r.converged,
            divider: r.divider,
            iterations: r.iterations,
        })
        .collect();
    extrema.sort_by(|a, b| a.value.total_cmp(&b.value));

    Ok(MbcResult {
        extrema,
        nfe: progress.nfe,
        iterations: progress.iterations,
        per_region_trace: progress.trace,
    })
}

#[cfg(test)]
mod tests;
