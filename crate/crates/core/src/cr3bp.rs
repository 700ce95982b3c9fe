//! Circular restricted three-body state-costate dynamics in the rotating frame.
//!
//! Units are the usual synodic set: the primary separation is one length
//! unit, the frame rotates at unit rate, and masses are 1-mu (at x = -mu)
//! and mu (at x = 1-mu). The acceleration splits into a position part g(r)
//! (gravity plus centrifugal) and a velocity part h(v) (Coriolis).

use crate::cartesian::{primer_control, thrust_blocks, ControlEval};
use crate::smoothing::SmoothingConfig;
use crate::units::CanonicalParams;
use crate::{DynError, AUG_DIM};
use nalgebra::{Matrix3, SMatrix, Vector3};

/// Earth-Moon mass ratio used by the examples and tests.
pub const EARTH_MOON_MU: f64 = 0.012150585609624;

/// Augmented rotating-frame state-costate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cr3bpAugState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub m: f64,
    pub lam_r: Vector3<f64>,
    pub lam_v: Vector3<f64>,
    pub lam_m: f64,
}

impl Cr3bpAugState {
    pub fn from_array(z: &[f64; AUG_DIM]) -> Self {
        Self {
            r: Vector3::new(z[0], z[1], z[2]),
            v: Vector3::new(z[3], z[4], z[5]),
            m: z[6],
            lam_r: Vector3::new(z[7], z[8], z[9]),
            lam_v: Vector3::new(z[10], z[11], z[12]),
            lam_m: z[13],
        }
    }

    pub fn to_array(&self) -> [f64; AUG_DIM] {
        [
            self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z, self.m, self.lam_r.x,
            self.lam_r.y, self.lam_r.z, self.lam_v.x, self.lam_v.y, self.lam_v.z, self.lam_m,
        ]
    }
}

fn validate_mu(mu: f64) -> Result<(), DynError> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(DynError::InvalidState("mass ratio must lie in (0, 1/2)"));
    }
    Ok(())
}

/// Offsets of the spacecraft from the two primaries.
fn primary_offsets(r: &Vector3<f64>, mu: f64) -> (Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(r.x + mu, r.y, r.z),
        Vector3::new(r.x + mu - 1.0, r.y, r.z),
    )
}

fn check_separation(d1: &Vector3<f64>, d2: &Vector3<f64>) -> Result<(f64, f64), DynError> {
    let r1 = d1.norm();
    let r2 = d2.norm();
    if !(r1 > 1e-12) || !(r2 > 1e-12) {
        return Err(DynError::SingularRadius("collision with a primary"));
    }
    Ok((r1, r2))
}

/// Position-dependent acceleration g(r): both gravity wells plus the
/// centrifugal terms of the rotating frame.
pub fn gravity_rotating(r: &Vector3<f64>, mu: f64) -> Result<Vector3<f64>, DynError> {
    validate_mu(mu)?;
    let (d1, d2) = primary_offsets(r, mu);
    let (r1, r2) = check_separation(&d1, &d2)?;
    let g = Vector3::new(r.x, r.y, 0.0) - (1.0 - mu) / r1.powi(3) * d1 - mu / r2.powi(3) * d2;
    Ok(g)
}

/// Velocity-dependent (Coriolis) acceleration h(v) = [2 v_y, -2 v_x, 0].
pub fn coriolis(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(2.0 * v.y, -2.0 * v.x, 0.0)
}

/// Constant Coriolis matrix H = dh/dv.
pub fn coriolis_matrix() -> Matrix3<f64> {
    Matrix3::new(0.0, 2.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

/// Gravity gradient G = dg/dr; symmetric since g is the gradient of the
/// effective potential.
pub fn gravity_gradient(r: &Vector3<f64>, mu: f64) -> Result<Matrix3<f64>, DynError> {
    validate_mu(mu)?;
    let (d1, d2) = primary_offsets(r, mu);
    let (r1, r2) = check_separation(&d1, &d2)?;
    let eye = Matrix3::identity();
    let mut g = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    for (m_i, d, rn) in [(1.0 - mu, d1, r1), (mu, d2, r2)] {
        g += m_i * (3.0 / rn.powi(5) * (d * d.transpose()) - eye / rn.powi(3));
    }
    Ok(g)
}

/// Effective potential U = (x² + y²)/2 + (1-mu)/r1 + mu/r2; the quantity
/// 2U - v² is conserved on ballistic trajectories.
pub fn effective_potential(r: &Vector3<f64>, mu: f64) -> Result<f64, DynError> {
    validate_mu(mu)?;
    let (d1, d2) = primary_offsets(r, mu);
    let (r1, r2) = check_separation(&d1, &d2)?;
    Ok(0.5 * (r.x * r.x + r.y * r.y) + (1.0 - mu) / r1 + mu / r2)
}

/// Jacobi-like integral C = 2U(r) - v² of the ballistic rotating-frame flow.
pub fn jacobi_constant(r: &Vector3<f64>, v: &Vector3<f64>, mu: f64) -> Result<f64, DynError> {
    Ok(2.0 * effective_potential(r, mu)? - v.norm_squared())
}

/// Variational Hamiltonian with the extremal control substituted.
pub fn cr3bp_hamiltonian(
    z: &Cr3bpAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<f64, DynError> {
    let ctrl = cr3bp_switching(z, params, cfg);
    let g = gravity_rotating(&z.r, params.mu)?;
    let f_v = g + coriolis(&z.v) + (params.t_max / z.m) * ctrl.delta * ctrl.alpha_hat;
    let f_m = -params.t_max / params.c * ctrl.delta;
    Ok(params.t_max / params.c * ctrl.delta
        + z.lam_r.dot(&z.v)
        + z.lam_v.dot(&f_v)
        + z.lam_m * f_m)
}

/// Switching function, throttle and thrust direction at one state.
pub fn cr3bp_switching(
    z: &Cr3bpAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> ControlEval {
    primer_control(&z.lam_v, z.m, z.lam_m, params, cfg)
}

/// Augmented right-hand side with the smoothed extremal control substituted.
/// `params.mu` is the mass ratio.
pub fn cr3bp_rhs(
    z: &Cr3bpAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<[f64; AUG_DIM], DynError> {
    if !(z.m > 0.0) {
        return Err(DynError::InvalidState("mass must be positive"));
    }
    let mu = params.mu;
    let g = gravity_rotating(&z.r, mu)?;
    let big_g = gravity_gradient(&z.r, mu)?;
    let ctrl = cr3bp_switching(z, params, cfg);
    let nv = z.lam_v.norm();

    let v_dot = g + coriolis(&z.v) + (params.t_max / z.m) * ctrl.delta * ctrl.alpha_hat;
    let m_dot = -params.t_max / params.c * ctrl.delta;
    let lam_r_dot = -big_g.transpose() * z.lam_v;
    let lam_v_dot = -z.lam_r - coriolis_matrix().transpose() * z.lam_v;
    let lam_m_dot = -(params.t_max / (z.m * z.m)) * nv * ctrl.delta;

    Ok([
        z.v.x, z.v.y, z.v.z, v_dot.x, v_dot.y, v_dot.z, m_dot, lam_r_dot.x, lam_r_dot.y,
        lam_r_dot.z, lam_v_dot.x, lam_v_dot.y, lam_v_dot.z, lam_m_dot,
    ])
}

/// Analytic Jacobian of [`cr3bp_rhs`].
pub fn cr3bp_rhs_jacobian(
    z: &Cr3bpAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<SMatrix<f64, AUG_DIM, AUG_DIM>, DynError> {
    if !(z.m > 0.0) {
        return Err(DynError::InvalidState("mass must be positive"));
    }
    let mu = params.mu;
    let big_g = gravity_gradient(&z.r, mu)?;
    let blocks = thrust_blocks(&z.lam_v, z.m, z.lam_m, params, cfg)?;
    let (d1, d2) = primary_offsets(&z.r, mu);
    let (r1, r2) = check_separation(&d1, &d2)?;

    // d(lam_r_dot)/dr = -d(G lam_v)/dr, the third-derivative tensor of the
    // gravitational part contracted with lam_v (centrifugal part is linear).
    let lam_v = z.lam_v;
    let eye = Matrix3::identity();
    let mut dglv = Matrix3::zeros();
    for (m_i, d, rn) in [(1.0 - mu, d1, r1), (mu, d2, r2)] {
        let dlv = d.dot(&lam_v);
        dglv += m_i
            * (3.0 / rn.powi(5) * (dlv * eye + d * lam_v.transpose() + lam_v * d.transpose())
                - 15.0 * dlv / rn.powi(7) * (d * d.transpose()));
    }

    let mut jac = SMatrix::<f64, AUG_DIM, AUG_DIM>::zeros();
    let set3 = |jac: &mut SMatrix<f64, AUG_DIM, AUG_DIM>, row: usize, col: usize, m: &Matrix3<f64>| {
        for i in 0..3 {
            for j in 0..3 {
                jac[(row + i, col + j)] = m[(i, j)];
            }
        }
    };

    set3(&mut jac, 0, 3, &eye);
    set3(&mut jac, 3, 0, &big_g);
    set3(&mut jac, 3, 3, &coriolis_matrix());
    for i in 0..3 {
        jac[(3 + i, 6)] = blocks.f23[i];
        jac[(3 + i, 13)] = blocks.f26[i];
        for j in 0..3 {
            jac[(3 + i, 10 + j)] = blocks.f25[(i, j)];
        }
    }
    jac[(6, 6)] = blocks.f33;
    for j in 0..3 {
        jac[(6, 10 + j)] = blocks.f35[j];
    }
    jac[(6, 13)] = blocks.f36;
    set3(&mut jac, 7, 0, &(-dglv));
    set3(&mut jac, 7, 10, &(-big_g.transpose()));
    set3(&mut jac, 10, 7, &(-eye));
    set3(&mut jac, 10, 10, &(-coriolis_matrix().transpose()));
    jac[(13, 6)] = blocks.f63;
    for j in 0..3 {
        jac[(13, 10 + j)] = blocks.f65[j];
    }
    jac[(13, 13)] = blocks.f66;

    Ok(jac)
}

/// The five equilibria of the rotating frame: collinear points from 1-D root
/// solves of g_x on the x-axis, triangular points in closed form.
pub fn libration_points(mu: f64) -> Result<[Vector3<f64>; 5], DynError> {
    validate_mu(mu)?;
    let gx = |x: f64| {
        gravity_rotating(&Vector3::new(x, 0.0, 0.0), mu)
            .map(|g| g.x)
            .unwrap_or(f64::NAN)
    };
    let eps = 1e-7;
    let l1 = bisect(&gx, -mu + eps, 1.0 - mu - eps)?;
    let l2 = bisect(&gx, 1.0 - mu + eps, 2.5)?;
    let l3 = bisect(&gx, -2.5, -mu - eps)?;
    let half = 0.5 - mu;
    let tri = 3.0f64.sqrt() / 2.0;
    Ok([
        Vector3::new(l1, 0.0, 0.0),
        Vector3::new(l2, 0.0, 0.0),
        Vector3::new(l3, 0.0, 0.0),
        Vector3::new(half, tri, 0.0),
        Vector3::new(half, -tri, 0.0),
    ])
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Result<f64, DynError> {
    let mut fa = f(a);
    let fb = f(b);
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > 0.0 {
        return Err(DynError::InvalidState("root not bracketed"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() < 1e-16 * mid.abs().max(1.0) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}
