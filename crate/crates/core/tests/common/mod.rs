//! Shared oracles for the integration tests: finite differences and
//! comparison helpers, independent of the implementation paths they check.

use mintraj::shooting::{self, CostateGuess, ShootingProblem};
use mintraj::AUG_DIM;

/// Central finite difference of the flow map z0 -> z(tf) in direction `col`.
pub fn flow_map_fd_column(
    problem: &ShootingProblem,
    eta0: &CostateGuess,
    rho: f64,
    col: usize,
    step: f64,
) -> [f64; AUG_DIM] {
    let mut z0 = problem.initial_state(eta0);
    let h = step * z0[col].abs().max(1.0);
    let base = z0[col];
    z0[col] = base + h;
    let zp = propagate_raw(problem, &z0, rho);
    z0[col] = base - h;
    let zm = propagate_raw(problem, &z0, rho);
    let mut out = [0.0; AUG_DIM];
    for i in 0..AUG_DIM {
        out[i] = (zp[i] - zm[i]) / (2.0 * h);
    }
    out
}

/// Propagate an explicit augmented initial state (not assembled from eta).
pub fn propagate_raw(problem: &ShootingProblem, z0: &[f64; AUG_DIM], rho: f64) -> [f64; AUG_DIM] {
    // Reuse the library propagation by treating the costate slots of z0 as
    // the guess and overriding the state slots.
    let mut p = problem.clone();
    p.initial.copy_from_slice(&z0[..6]);
    p.m0 = z0[6];
    let eta: CostateGuess = z0[7..14].try_into().unwrap();
    shooting::propagate(&p, &eta, rho).expect("propagation")
}

/// Relative agreement with an additive floor for fd roundoff.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}
