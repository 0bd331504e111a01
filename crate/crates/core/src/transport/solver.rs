use serde::{Deserialize, Serialize};

use super::banded::{BandedLu, BandedMatrix};
use super::curve::BreakthroughCurve;
use super::velocity::{poiseuille_velocity, VelocityField};
use super::{Isotherm, TransportError, TransportParams};
use crate::fmt_f64;

const WALL_TOL: f64 = 1e-10;
const WALL_MAX_SWEEPS: usize = 50;
// refreeze the wall slope when an iteration shrinks the update by less
const SLOW_CONTRACTION: f64 = 0.25;

/// Bulk and surface concentrations at one instant.
///
/// `c` is stored column by column: cell `(i, j)` (x index `i`, y index `j`,
/// `j = 0` touching the reactive wall) lives at `i * ny + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub nx: usize,
    pub ny: usize,
    pub c: Vec<f64>,
    /// Surface concentration on the `nx` wall faces.
    pub m: Vec<f64>,
    pub t: f64,
    /// Recorded steps completed.
    pub step: usize,
    /// Start-up substeps completed.
    pub substep: usize,
    /// Implicit weight of the step that produced this state (0.5 for
    /// Crank-Nicolson, 1 for backward Euler); 0 for the initial state.
    pub theta: f64,
}

impl FieldState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            c: vec![0.0; nx * ny],
            m: vec![0.0; nx],
            t: 0.0,
            step: 0,
            substep: 0,
            theta: 0.0,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.ny + j]
    }

    /// `x,y,c` rows at cell centres.
    pub fn field_csv(&self, params: &TransportParams) -> String {
        let (dx, dy) = (params.dx(), params.dy());
        let mut out = String::from("x,y,c\n");
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64((i as f64 + 0.5) * dx),
                    fmt_f64((j as f64 + 0.5) * dy),
                    fmt_f64(self.at(i, j))
                ));
            }
        }
        out
    }

    /// `x,m` rows along the wall.
    pub fn wall_csv(&self, params: &TransportParams) -> String {
        let dx = params.dx();
        let mut out = String::from("x,m\n");
        for (i, m) in self.m.iter().enumerate() {
            out.push_str(&format!("{},{}\n", fmt_f64((i as f64 + 0.5) * dx), fmt_f64(*m)));
        }
        out
    }
}

/// Mean concentration over the outlet column.
pub fn outlet_average(state: &FieldState) -> f64 {
    let start = (state.nx - 1) * state.ny;
    state.c[start..start + state.ny].iter().sum::<f64>() / state.ny as f64
}

/// Wall flux over one θ-step and its derivative in the θ-weighted wall
/// concentration `x`, with the surface concentration eliminated: the rate is
/// taken at `x` and at the θ-weighted surface concentration.
fn wall_flux(x: f64, m_old: f64, theta: f64, delta: f64, params: &TransportParams) -> (f64, f64) {
    let a = params.da_a;
    let (k, dk) = match params.isotherm {
        Isotherm::Henry => (params.da_d, 0.0),
        Isotherm::Langmuir => (a * x / params.m_cap + params.da_d, a / params.m_cap),
    };
    let denom = 1.0 + theta * delta * k;
    let f = (a * x - k * m_old) / denom;
    let df = ((a - dk * m_old) - f * theta * delta * dk) / denom;
    (f, df)
}

/// Surface concentration after one θ-step of the wall law, given the wall
/// concentration at both ends of the step. This is the θ-scheme for the wall
/// ODE with `c` prescribed.
pub fn wall_update(m_old: f64, c_old: f64, c_new: f64, theta: f64, delta: f64, params: &TransportParams) -> f64 {
    let x = theta * c_new + (1.0 - theta) * c_old;
    m_old + delta * wall_flux(x, m_old, theta, delta, params).0
}

/// Secant step for the fixed point `x = g(x)`, applied cell by cell.
fn secant_update(x: &[f64], g: &[f64], prev: Option<&(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let Some((x0, g0)) = prev else {
        return g.to_vec();
    };
    (0..x.len())
        .map(|i| {
            let f = g[i] - x[i];
            let gamma = f / (f - (g0[i] - x0[i]));
            // the plain iteration contracts, so a sane ratio is small
            if gamma.is_finite() && gamma.abs() <= 1.0 {
                g[i] - gamma * (g[i] - g0[i])
            } else {
                g[i]
            }
        })
        .collect()
}

/// Factorized system for one implicit weight and step size. The wall flux
/// enters the matrix through its derivative `slope`, frozen at the last
/// refactorization (chord iteration).
struct Kernel {
    theta: f64,
    delta: f64,
    slope: Vec<f64>,
    lu: BandedLu,
}

/// Assembled operators for one parameter set.
pub struct Solver {
    params: TransportParams,
    velocity: VelocityField,
    /// Net outflow per unit volume, `dc/dt = -op c + source` without the wall.
    op: BandedMatrix,
    source: Vec<f64>,
    main: Kernel,
    startup: Option<Kernel>,
    refactorizations: usize,
    solves: usize,
    // wall dc/dt over the previous step, seeds the next iteration
    trend: Option<Vec<f64>>,
}

impl Solver {
    pub fn new(params: &TransportParams) -> Result<Self, TransportError> {
        params.validate()?;
        let velocity = poiseuille_velocity(params.ny, params.height);
        let (op, source) = assemble(params, &velocity);
        let fresh = |theta: f64, delta: f64| {
            // zero data: flux slope at x = 0, m = 0
            let slope = vec![wall_flux(0.0, 0.0, theta, delta, params).1; params.nx];
            kernel(params, &op, theta, delta, slope)
        };
        let main = fresh(params.theta(), params.dt)?;
        let startup = match params.startup_substeps {
            0 => None,
            s => Some(fresh(1.0, params.dt / s as f64)?),
        };
        Ok(Self { params: params.clone(), velocity, op, source, main, startup, refactorizations: 0, solves: 0, trend: None })
    }

    pub fn params(&self) -> &TransportParams {
        &self.params
    }

    pub fn velocity(&self) -> &VelocityField {
        &self.velocity
    }

    pub fn operator(&self) -> &BandedMatrix {
        &self.op
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Matrix refactorizations triggered by slow wall iterations so far.
    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    /// Linear solves performed so far.
    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn initial_state(&self) -> FieldState {
        FieldState::zeros(self.params.nx, self.params.ny)
    }

    fn in_startup(&self, state: &FieldState) -> bool {
        state.step == 0 && state.substep < self.params.startup_substeps
    }

    /// Advance by one kernel application. During start-up that is one
    /// backward-Euler substep, afterwards one Crank-Nicolson step of `dt`.
    pub fn step(&mut self, state: &FieldState) -> Result<FieldState, TransportError> {
        let p = &self.params;
        if state.nx != p.nx || state.ny != p.ny || state.c.len() != p.nx * p.ny || state.m.len() != p.nx {
            return Err(TransportError::Shape(format!(
                "state {}x{} vs grid {}x{}",
                state.nx, state.ny, p.nx, p.ny
            )));
        }
        let startup = self.in_startup(state);
        let mut next = self.apply(startup, state)?;
        let p = &self.params;
        if startup {
            next.substep = state.substep + 1;
            next.step = state.step;
            if next.substep == p.startup_substeps {
                next.step = 1;
                next.t = p.dt;
            } else {
                next.t = p.dt * next.substep as f64 / p.startup_substeps as f64;
            }
        } else {
            next.substep = state.substep;
            next.step = state.step + 1;
            next.t = p.dt * next.step as f64;
        }
        Ok(next)
    }

    /// True when `state` closes a recorded step.
    pub fn is_recorded(&self, state: &FieldState) -> bool {
        state.step > 0 && !self.in_startup(state)
    }

    fn apply(&mut self, startup: bool, state: &FieldState) -> Result<FieldState, TransportError> {
        let (nx, ny) = (self.params.nx, self.params.ny);
        let n = nx * ny;
        let weight = self.params.wall_flux_weight() / self.params.dy();
        let nonlinear = self.params.isotherm == Isotherm::Langmuir && self.params.da_a > 0.0;
        let (theta, delta) = {
            let k = self.kernel(startup);
            (k.theta, k.delta)
        };
        let fail = |residual: f64, sweeps: usize| TransportError::NoConvergence {
            step: state.step + 1,
            residual,
            sweeps,
        };

        let mut base = vec![0.0; n];
        self.op.mul_vec(&state.c, &mut base);
        for (idx, b) in base.iter_mut().enumerate() {
            *b = state.c[idx] / delta - (1.0 - theta) * *b + self.source[idx];
        }

        let wall_old: Vec<f64> = (0..nx).map(|i| state.c[i * ny]).collect();
        // current iterate for the new wall concentration
        let mut wall = match &self.trend {
            Some(rate) => wall_old.iter().zip(rate).map(|(w, r)| w + delta * r).collect(),
            None => wall_old.clone(),
        };
        let mut flux = vec![0.0; nx];
        let mut sol = vec![0.0; n];
        let mut image = vec![0.0; nx];
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut accelerate = true;
        let mut last_residual = f64::INFINITY;
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            self.solves += 1;
            let k = self.kernel(startup);
            sol.copy_from_slice(&base);
            for i in 0..nx {
                let x = theta * wall[i] + (1.0 - theta) * wall_old[i];
                let (f, _) = wall_flux(x, state.m[i], theta, delta, &self.params);
                // the slope part moves to the matrix
                flux[i] = f - k.slope[i] * theta * wall[i];
                sol[i * ny] -= weight * flux[i];
            }
            k.lu.solve_in_place(&mut sol);

            let mut residual: f64 = 0.0;
            for i in 0..nx {
                let c_new = sol[i * ny];
                flux[i] += k.slope[i] * theta * c_new;
                residual = residual.max(theta * (c_new - wall[i]).abs());
                image[i] = c_new;
            }
            if !residual.is_finite() {
                return Err(TransportError::NonFinite { step: state.step + 1 });
            }
            if !nonlinear || residual <= WALL_TOL {
                wall.copy_from_slice(&image);
                break;
            }
            if sweeps >= WALL_MAX_SWEEPS {
                return Err(fail(residual, sweeps));
            }
            if accelerate {
                let next = secant_update(&wall, &image, prev.as_ref());
                prev = Some((std::mem::replace(&mut wall, next), image.clone()));
            } else {
                wall.copy_from_slice(&image);
            }
            if residual > SLOW_CONTRACTION * last_residual {
                // stale slope: refreeze it at the current iterate and fall
                // back to plain Newton for the rest of the step
                accelerate = false;
                let slope = (0..nx)
                    .map(|i| {
                        let x = theta * wall[i] + (1.0 - theta) * wall_old[i];
                        wall_flux(x, state.m[i], theta, delta, &self.params).1
                    })
                    .collect();
                let fresh = kernel(&self.params, &self.op, theta, delta, slope)?;
                *self.kernel_mut(startup) = fresh;
                self.refactorizations += 1;
                last_residual = f64::INFINITY;
            } else {
                last_residual = residual;
            }
        }

        if sol.iter().any(|v| !v.is_finite()) {
            return Err(TransportError::NonFinite { step: state.step + 1 });
        }
        let m: Vec<f64> = state.m.iter().zip(&flux).map(|(m, f)| m + delta * f).collect();
        self.trend = Some(wall.iter().zip(&wall_old).map(|(a, b)| (a - b) / delta).collect());
        Ok(FieldState {
            nx,
            ny,
            c: sol,
            m,
            t: state.t,
            step: state.step,
            substep: state.substep,
            theta,
        })
    }

    fn kernel(&self, startup: bool) -> &Kernel {
        match (&self.startup, startup) {
            (Some(k), true) => k,
            _ => &self.main,
        }
    }

    fn kernel_mut(&mut self, startup: bool) -> &mut Kernel {
        match (&mut self.startup, startup) {
            (Some(k), true) => k,
            _ => &mut self.main,
        }
    }

    /// Integrate from zero data to `t_end`, handing every intermediate state
    /// (start-up substeps included) to `visit`.
    pub fn run(
        &mut self,
        mut visit: impl FnMut(&FieldState),
    ) -> Result<(BreakthroughCurve, FieldState), TransportError> {
        let steps = self.params.steps();
        let mut times = Vec::with_capacity(steps);
        let mut values = Vec::with_capacity(steps);
        let mut state = self.initial_state();
        self.trend = None;
        visit(&state);
        while state.step < steps {
            state = self.step(&state)?;
            visit(&state);
            if self.is_recorded(&state) {
                times.push(state.t);
                values.push(outlet_average(&state));
            }
        }
        Ok((BreakthroughCurve { times, values }, state))
    }

    /// Like [`Solver::run`] but keeps every state.
    pub fn run_with_history(&mut self) -> Result<(BreakthroughCurve, Vec<FieldState>), TransportError> {
        let mut history = Vec::new();
        let (curve, _) = self.run(|s| history.push(s.clone()))?;
        Ok((curve, history))
    }
}

/// Breakthrough curve and final state for one parameter set.
pub fn simulate(params: &TransportParams) -> Result<(BreakthroughCurve, FieldState), TransportError> {
    Solver::new(params)?.run(|_| {})
}

fn kernel(
    params: &TransportParams,
    op: &BandedMatrix,
    theta: f64,
    delta: f64,
    slope: Vec<f64>,
) -> Result<Kernel, TransportError> {
    let mut lhs = op.scaled_plus_identity(theta, 1.0 / delta);
    let weight = params.wall_flux_weight() / params.dy();
    for (i, s) in slope.iter().enumerate() {
        let p = i * params.ny;
        lhs.add(p, p, weight * s * theta);
    }
    Ok(Kernel { theta, delta, slope, lu: lhs.factor()? })
}

fn assemble(params: &TransportParams, velocity: &VelocityField) -> (BandedMatrix, Vec<f64>) {
    let (nx, ny) = (params.nx, params.ny);
    let (dx, dy) = (params.dx(), params.dy());
    let diff = 1.0 / params.pe;
    let vol = dx * dy;
    let n = nx * ny;
    let mut op = BandedMatrix::zeros(n, ny, ny);
    let mut source = vec![0.0; n];
    let idx = |i: usize, j: usize| i * ny + j;

    // flux a_l * c_l + a_r * c_r through a face from cell l to cell r
    let face = |op: &mut BandedMatrix, l: usize, r: usize, a_l: f64, a_r: f64| {
        op.add(l, l, a_l / vol);
        op.add(l, r, a_r / vol);
        op.add(r, l, -a_l / vol);
        op.add(r, r, -a_r / vol);
    };

    for j in 0..ny {
        let u = velocity.u1[j];
        let (conv_l, conv_r) = if u * dx * params.pe > 2.0 {
            (u * dy, 0.0)
        } else {
            (0.5 * u * dy, 0.5 * u * dy)
        };
        let g = diff * dy / dx;
        for i in 0..nx - 1 {
            face(&mut op, idx(i, j), idx(i + 1, j), conv_l + g, conv_r - g);
        }
        // inlet: Dirichlet c = 1 half a cell away
        let p = idx(0, j);
        op.add(p, p, 2.0 * g / vol);
        source[p] += (u * dy + 2.0 * g) / vol;
        // outlet: advective outflow only
        let q = idx(nx - 1, j);
        op.add(q, q, u * dy / vol);
    }
    let g = diff * dx / dy;
    for i in 0..nx {
        for j in 0..ny - 1 {
            face(&mut op, idx(i, j), idx(i, j + 1), g, -g);
        }
    }
    (op, source)
}

/// Boundary fluxes of a state: `(inflow, outflow)` per unit time.
pub(crate) fn boundary_fluxes(params: &TransportParams, velocity: &VelocityField, c: &[f64]) -> (f64, f64) {
    let (nx, ny) = (params.nx, params.ny);
    let (dx, dy) = (params.dx(), params.dy());
    let g = dy / (params.pe * dx);
    let mut inflow = 0.0;
    let mut outflow = 0.0;
    for j in 0..ny {
        let u = velocity.u1[j];
        inflow += u * dy + 2.0 * g * (1.0 - c[j]);
        outflow += u * dy * c[(nx - 1) * ny + j];
    }
    (inflow, outflow)
}
