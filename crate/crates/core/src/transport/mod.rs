//! Direct problem: dimensionless reactive convection-diffusion in a channel.
//!
//! The channel `[0, length] x [0, height]` carries a half-Poiseuille flow.
//! Solute enters at `x = 0` with `c = 1`, leaves through `x = length` with
//! zero diffusive flux, the top edge is a symmetry line, and the bottom
//! edge is a reactive wall whose surface concentration `m` follows a Henry
//! or Langmuir isotherm. Space is discretized with cell-centred finite
//! volumes; time with Crank-Nicolson.

mod audit;
mod banded;
mod curve;
mod solver;
mod velocity;

pub use audit::mass_audit;
pub use banded::{BandedLu, BandedMatrix, SingularPivot};
pub use curve::{BreakthroughCurve, CurveError};
pub use solver::{outlet_average, simulate, wall_update, FieldState, Solver};
pub use velocity::{poiseuille_velocity, VelocityField};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Isotherm {
    Henry,
    Langmuir,
}

impl std::str::FromStr for Isotherm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "henry" => Ok(Self::Henry),
            "langmuir" => Ok(Self::Langmuir),
            other => Err(format!("unknown isotherm '{other}' (expected henry or langmuir)")),
        }
    }
}

fn default_length() -> f64 {
    17.5
}
fn default_height() -> f64 {
    1.0
}
fn default_nx() -> usize {
    176
}
fn default_ny() -> usize {
    16
}
fn default_m_cap() -> f64 {
    1000.0
}
fn default_startup_substeps() -> usize {
    16
}
fn default_theta_shift() -> f64 {
    1e-3
}

/// Physics and numerics of one direct simulation. All quantities are
/// dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportParams {
    pub pe: f64,
    pub da_a: f64,
    pub da_d: f64,
    /// Langmuir capacity M; ignored by the Henry isotherm.
    #[serde(default = "default_m_cap")]
    pub m_cap: f64,
    pub isotherm: Isotherm,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_ny")]
    pub ny: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Wall coupling `dm/dt = -grad c . n` instead of `-(1/Pe) grad c . n`.
    #[serde(default)]
    pub legacy_flux_coupling: bool,
    /// Backward-Euler substeps replacing the first Crank-Nicolson step.
    /// Damps the start-up transient from the inlet discontinuity.
    #[serde(default = "default_startup_substeps")]
    pub startup_substeps: usize,
    /// Implicit weight is `0.5 + theta_shift * dt`. The shift is O(dt), so the
    /// scheme stays second order while stiff wall modes are damped.
    #[serde(default = "default_theta_shift")]
    pub theta_shift: f64,
}

impl TransportParams {
    /// Diffusion-dominated Henry case: Pe = 10, Da_a = 0.005, Da_d = 0.05,
    /// T = 40, dt = 0.1.
    pub fn henry_reference() -> Self {
        Self {
            pe: 10.0,
            da_a: 0.005,
            da_d: 0.05,
            m_cap: default_m_cap(),
            isotherm: Isotherm::Henry,
            length: default_length(),
            height: default_height(),
            nx: default_nx(),
            ny: default_ny(),
            dt: 0.1,
            t_end: 40.0,
            legacy_flux_coupling: false,
            startup_substeps: default_startup_substeps(),
            theta_shift: default_theta_shift(),
        }
    }

    /// Reaction-dominated Langmuir case: Pe = 10, Da_a = 100, Da_d = 1,
    /// M = 1000, T = 1800, dt = 30.
    pub fn langmuir_reference() -> Self {
        Self {
            pe: 10.0,
            da_a: 100.0,
            da_d: 1.0,
            m_cap: 1000.0,
            isotherm: Isotherm::Langmuir,
            dt: 30.0,
            t_end: 1800.0,
            ..Self::henry_reference()
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        let bad = |msg: String| Err(TransportError::InvalidParams(msg));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.pe) {
            return bad(format!("pe must be positive, got {}", self.pe));
        }
        if !(self.da_a.is_finite() && self.da_a >= 0.0) {
            return bad(format!("da_a must be non-negative, got {}", self.da_a));
        }
        if !(self.da_d.is_finite() && self.da_d >= 0.0) {
            return bad(format!("da_d must be non-negative, got {}", self.da_d));
        }
        if self.isotherm == Isotherm::Langmuir && !finite_pos(self.m_cap) {
            return bad(format!("m_cap must be positive for Langmuir, got {}", self.m_cap));
        }
        if !finite_pos(self.length) || !finite_pos(self.height) {
            return bad("length and height must be positive".into());
        }
        if self.nx < 4 || self.ny < 4 {
            return bad(format!("nx and ny must be at least 4, got {} x {}", self.nx, self.ny));
        }
        if !finite_pos(self.dt) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.theta_shift.is_finite() && self.theta_shift >= 0.0) {
            return bad(format!("theta_shift must be non-negative, got {}", self.theta_shift));
        }
        if !finite_pos(self.t_end) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.height / self.ny as f64
    }

    /// Implicit weight of the regular steps.
    pub fn theta(&self) -> f64 {
        (0.5 + self.theta_shift * self.dt).min(1.0)
    }

    /// Number of recorded steps: `t_end / dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    /// Fraction of the wall reaction flux removed from the bulk.
    pub fn wall_flux_weight(&self) -> f64 {
        if self.legacy_flux_coupling {
            1.0 / self.pe
        } else {
            1.0
        }
    }

    /// Set a named physical parameter (`pe`, `da_a`, `da_d`, `m_cap`).
    pub fn set_named(&mut self, name: &str, value: f64) -> Result<(), TransportError> {
        match name {
            "pe" => self.pe = value,
            "da_a" => self.da_a = value,
            "da_d" => self.da_d = value,
            "m_cap" | "m" => self.m_cap = value,
            other => {
                return Err(TransportError::InvalidParams(format!(
                    "unknown parameter '{other}' (expected pe, da_a, da_d or m_cap)"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("invalid transport parameters: {0}")]
    InvalidParams(String),
    #[error("wall coupling did not converge at step {step}: residual {residual:e} after {sweeps} sweeps")]
    NoConvergence { step: usize, residual: f64, sweeps: usize },
    #[error("non-finite field at step {step}")]
    NonFinite { step: usize },
    #[error("state does not match the grid: {0}")]
    Shape(String),
    #[error("linear solve failed: {0}")]
    Singular(#[from] SingularPivot),
}

/// Net adsorption rate `dm/dt` at one wall point.
pub fn isotherm_rate(c_wall: f64, m: f64, params: &TransportParams) -> f64 {
    match params.isotherm {
        Isotherm::Henry => params.da_a * c_wall - params.da_d * m,
        Isotherm::Langmuir => params.da_a * c_wall * (1.0 - m / params.m_cap) - params.da_d * m,
    }
}
