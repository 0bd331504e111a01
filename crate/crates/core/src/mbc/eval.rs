use rayon::prelude::*;

use super::MbcError;

pub type ObjectiveError = Box<dyn std::error::Error + Send + Sync>;

/// A real-valued function to minimize. Implementations must tolerate
/// concurrent calls.
pub trait Objective: Sync {
    fn evaluate(&self, point: &[f64]) -> Result<f64, ObjectiveError>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, point: &[f64]) -> Result<f64, ObjectiveError> {
        Ok(self(point))
    }
}

/// Evaluates batches of points, optionally on a dedicated worker pool.
///
/// Results are always returned in input order, so the degree of parallelism
/// never changes what the optimizer sees.
pub struct Evaluator {
    pool: Option<rayon::ThreadPool>,
}

impl Evaluator {
    pub fn sequential() -> Self {
        Self { pool: None }
    }

    pub fn with_workers(workers: usize) -> Result<Self, MbcError> {
        if workers <= 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MbcError::InvalidConfig(format!("worker pool: {e}")))?;
        Ok(Self { pool: Some(pool) })
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// `f(0), ..., f(n - 1)` in index order, concurrently when a pool exists.
    pub fn map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        }
    }

    /// Evaluate every point; the first failure (by index) aborts the batch.
    pub fn evaluate<O: Objective + ?Sized>(
        &self,
        objective: &O,
        points: &[Vec<f64>],
    ) -> Result<Vec<f64>, MbcError> {
        self.map(points.len(), |i| objective.evaluate(&points[i]))
            .into_iter()
            .zip(points)
            .map(|(r, p)| match r {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(MbcError::NonFinite { point: p.clone(), value: v }),
                Err(e) => Err(MbcError::Objective { point: p.clone(), message: e.to_string() }),
            })
            .collect()
    }
}
