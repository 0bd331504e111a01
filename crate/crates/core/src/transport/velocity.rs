use serde::{Deserialize, Serialize};

/// Fully developed channel flow between a no-slip wall at `y = 0` and a
/// symmetry line at `y = height`, scaled to unit cross-section mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub height: f64,
    /// Cell-averaged horizontal speed per row, bottom row first. The
    /// vertical component is zero everywhere.
    pub u1: Vec<f64>,
}

impl VelocityField {
    /// Point value of the analytic profile.
    pub fn profile(&self, y: f64) -> f64 {
        half_poiseuille(y / self.height)
    }

    pub fn mean(&self) -> f64 {
        self.u1.iter().sum::<f64>() / self.u1.len() as f64
    }
}

fn half_poiseuille(eta: f64) -> f64 {
    1.5 * (2.0 * eta - eta * eta)
}

// antiderivative of the profile in the scaled coordinate
fn primitive(eta: f64) -> f64 {
    1.5 * (eta * eta - eta * eta * eta / 3.0)
}

/// Unit-mean half-Poiseuille profile on `ny` uniform rows.
///
/// Rows carry the exact cell average of the profile, so the discrete
/// volumetric flux equals `height` up to rounding.
pub fn poiseuille_velocity(ny: usize, height: f64) -> VelocityField {
    let u1 = (0..ny)
        .map(|j| {
            let a = j as f64 / ny as f64;
            let b = (j + 1) as f64 / ny as f64;
            (primitive(b) - primitive(a)) / (b - a)
        })
        .collect();
    VelocityField { height, u1 }
}
