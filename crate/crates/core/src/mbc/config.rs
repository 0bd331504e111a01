use serde::{Deserialize, Serialize};

use super::MbcError;

/// Control parameters of the Modified Bee Colony search.
///
/// Field names follow the usual MBC vocabulary: `n_best` best locations and
/// `m_persp` perspective locations receive `abb` and `abp` agent bees per
/// wave respectively, after `sb` scout bees have sampled the whole domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MbcConfig {
    pub n_best: usize,
    pub m_persp: usize,
    /// Initial half side of each local search box, one entry per axis.
    pub half_widths: Vec<f64>,
    /// Clustering radius separating region centers.
    pub delta: f64,
    pub sb: usize,
    pub abb: usize,
    pub abp: usize,
    /// Consecutive non-improving waves that trigger a shrink.
    pub stop_fail: usize,
    pub epsilon: f64,
    /// Global iteration budget shared by all regions.
    pub max_iter: usize,
    pub seed: u64,
}

impl MbcConfig {
    pub fn validate(&self, dims: usize) -> Result<(), MbcError> {
        let bad = |msg: String| Err(MbcError::InvalidConfig(msg));
        if self.n_best + self.m_persp == 0 {
            return bad("n_best + m_persp must be at least 1".into());
        }
        if self.m_persp > 0 && self.abp == 0 {
            return bad("abp must be at least 1 when m_persp > 0".into());
        }
        if self.n_best > 0 && self.abb == 0 {
            return bad("abb must be at least 1".into());
        }
        if self.sb == 0 {
            return bad("sb must be at least 1".into());
        }
        if self.stop_fail == 0 {
            return bad("stop_fail must be at least 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.half_widths.len() != dims {
            return bad(format!(
                "half_widths has {} entries, domain has {dims} dimensions",
                self.half_widths.len()
            ));
        }
        if let Some(h) = self.half_widths.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return bad(format!("half_widths must be positive, got {h}"));
        }
        Ok(())
    }
}
