//! Modified Bee Colony optimization applied to adsorption parameter
//! identification from breakthrough curves.
//!
//! - [`mbc`]: the optimizer.
//! - [`benchmarks`]: two-dimensional test objectives.
//! - [`transport`]: the direct problem, a reactive convection-diffusion
//!   channel advanced with Crank-Nicolson.
//! - [`inverse`]: residual functional, grid scans and MBC-driven
//!   identification of isotherm parameters.

pub mod benchmarks;
pub mod inverse;
pub mod mbc;
pub mod transport;

/// Decimal text with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
