use super::solver::{boundary_fluxes, FieldState};
use super::velocity::poiseuille_velocity;
use super::TransportParams;

/// Discrete mass balance over consecutive states of one run.
///
/// For every step the change of bulk mass plus the change of weighted
/// surface mass is compared with the net boundary influx evaluated at the
/// step's implicit weight. Absolute defects are summed and divided by the
/// total gross influx through the inlet. Fewer than two states give 0.
pub fn mass_audit(history: &[FieldState], params: &TransportParams) -> f64 {
    if history.len() < 2 {
        return 0.0;
    }
    let velocity = poiseuille_velocity(params.ny, params.height);
    let (dx, dy) = (params.dx(), params.dy());
    let w = params.wall_flux_weight();
    let mut defect = 0.0;
    let mut influx = 0.0;
    for pair in history.windows(2) {
        let (s0, s1) = (&pair[0], &pair[1]);
        let delta = s1.t - s0.t;
        let theta = s1.theta;
        let (in0, out0) = boundary_fluxes(params, &velocity, &s0.c);
        let (in1, out1) = boundary_fluxes(params, &velocity, &s1.c);
        let inflow = theta * in1 + (1.0 - theta) * in0;
        let outflow = theta * out1 + (1.0 - theta) * out0;
        let bulk: f64 = s1.c.iter().zip(&s0.c).map(|(a, b)| a - b).sum::<f64>() * dx * dy;
        let surface: f64 = s1.m.iter().zip(&s0.m).map(|(a, b)| a - b).sum::<f64>() * dx * w;
        defect += (bulk + surface - delta * (inflow - outflow)).abs();
        influx += delta * inflow;
    }
    if influx > 0.0 {
        defect / influx
    } else {
        0.0
    }
}
