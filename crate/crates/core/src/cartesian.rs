//! Two-body Cartesian state-costate dynamics.
//!
//! The augmented state is z = [r, v, m, lam_r, lam_v, lam_m]. The extremal
//! thrust direction opposes the velocity costate (primer vector direction)
//! and the throttle is the smoothed switching law; with those substituted the
//! right-hand side is smooth and the analytic 14x14 Jacobian drives the
//! variational equations.

use crate::smoothing::{self, SmoothingConfig};
use crate::units::CanonicalParams;
use crate::{DynError, AUG_DIM, COSTATE_NORM_FLOOR};
use nalgebra::{Matrix3, SMatrix, Vector3};

/// Augmented Cartesian state-costate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianAugState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub m: f64,
    pub lam_r: Vector3<f64>,
    pub lam_v: Vector3<f64>,
    pub lam_m: f64,
}

impl CartesianAugState {
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

    fn validate(&self) -> Result<(), DynError> {
        if !(self.m > 0.0) {
            return Err(DynError::InvalidState("mass must be positive"));
        }
        if !(self.r.norm() > 0.0) {
            return Err(DynError::SingularRadius("r = 0"));
        }
        Ok(())
    }
}

/// Instantaneous extremal control: thrust direction, smoothed throttle and
/// the switching function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlEval {
    pub alpha_hat: Vector3<f64>,
    pub delta: f64,
    pub s: f64,
    /// Set when the costate norm sits below the singularity floor and the
    /// direction fell back to a fixed axis.
    pub degenerate: bool,
}

/// Fallback thrust axis on the (measure-zero) singular set of the control law.
const FALLBACK_AXIS: Vector3<f64> = Vector3::new(1.0, 0.0, 0.0);

/// Switching function S = c ||lam_v|| / m + lam_m - 1 shared by the Cartesian
/// and rotating-frame backends.
pub(crate) fn switching_function(lam_v_norm: f64, m: f64, lam_m: f64, c: f64) -> f64 {
    c * lam_v_norm / m + lam_m - 1.0
}

pub(crate) fn primer_control(
    lam_v: &Vector3<f64>,
    m: f64,
    lam_m: f64,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> ControlEval {
    let nv = lam_v.norm();
    let (alpha_hat, degenerate) = if nv > COSTATE_NORM_FLOOR {
        (-lam_v / nv, false)
    } else {
        (FALLBACK_AXIS, true)
    };
    let s = switching_function(nv, m, lam_m, params.c);
    ControlEval {
        alpha_hat,
        delta: smoothing::throttle(s, cfg),
        s,
        degenerate,
    }
}

/// Extremal control at one state.
pub fn control(
    z: &CartesianAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> ControlEval {
    primer_control(&z.lam_v, z.m, z.lam_m, params, cfg)
}

/// Augmented right-hand side dz/dt with the smoothed extremal control
/// substituted.
pub fn rhs(
    z: &CartesianAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<[f64; AUG_DIM], DynError> {
    z.validate()?;
    let ctrl = control(z, params, cfg);
    let r_norm = z.r.norm();
    let r3 = r_norm.powi(3);
    let mu = params.mu;
    let nv = z.lam_v.norm();

    let v_dot = -mu / r3 * z.r + (params.t_max / z.m) * ctrl.delta * ctrl.alpha_hat;
    let m_dot = -params.t_max / params.c * ctrl.delta;
    let lam_r_dot = (mu / r3) * z.lam_v - (3.0 * mu * z.r.dot(&z.lam_v) / r_norm.powi(5)) * z.r;
    let lam_v_dot = -z.lam_r;
    let lam_m_dot = -(params.t_max / (z.m * z.m)) * nv * ctrl.delta;

    Ok([
        z.v.x, z.v.y, z.v.z, v_dot.x, v_dot.y, v_dot.z, m_dot, lam_r_dot.x, lam_r_dot.y,
        lam_r_dot.z, lam_v_dot.x, lam_v_dot.y, lam_v_dot.z, lam_m_dot,
    ])
}

/// Variational Hamiltonian with the extremal control substituted.
pub fn hamiltonian(
    z: &CartesianAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<f64, DynError> {
    z.validate()?;
    let ctrl = control(z, params, cfg);
    let r3 = z.r.norm().powi(3);
    let f_v = -params.mu / r3 * z.r + (params.t_max / z.m) * ctrl.delta * ctrl.alpha_hat;
    let f_m = -params.t_max / params.c * ctrl.delta;
    Ok(params.t_max / params.c * ctrl.delta
        + z.lam_r.dot(&z.v)
        + z.lam_v.dot(&f_v)
        + z.lam_m * f_m)
}

/// Blocks of the Jacobian rows that involve the thrust terms; shared with the
/// rotating-frame backend, whose throttle structure is identical.
pub(crate) struct ThrustBlocks {
    /// d(v_dot)/dm.
    pub f23: Vector3<f64>,
    /// d(v_dot)/d(lam_v).
    pub f25: Matrix3<f64>,
    /// d(v_dot)/d(lam_m).
    pub f26: Vector3<f64>,
    /// d(m_dot)/dm.
    pub f33: f64,
    /// d(m_dot)/d(lam_v).
    pub f35: Vector3<f64>,
    /// d(m_dot)/d(lam_m).
    pub f36: f64,
    /// d(lam_m_dot)/dm.
    pub f63: f64,
    /// d(lam_m_dot)/d(lam_v).
    pub f65: Vector3<f64>,
    /// d(lam_m_dot)/d(lam_m).
    pub f66: f64,
}

pub(crate) fn thrust_blocks(
    lam_v: &Vector3<f64>,
    m: f64,
    lam_m: f64,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<ThrustBlocks, DynError> {
    let nv = lam_v.norm();
    if nv <= COSTATE_NORM_FLOOR {
        return Err(DynError::DegenerateCostate);
    }
    let t_max = params.t_max;
    let c = params.c;
    let s = switching_function(nv, m, lam_m, c);
    let delta = smoothing::throttle(s, cfg);
    let ddelta = smoothing::throttle_derivative(s, cfg);
    let eye = Matrix3::identity();
    let lv_outer = lam_v * lam_v.transpose();

    let f23 = (t_max / (m * m * nv)) * delta * lam_v + (t_max * c / m.powi(3)) * ddelta * lam_v;
    let f25 = (t_max / (m * nv.powi(3))) * delta * lv_outer - (t_max / (m * nv)) * delta * eye
        - (t_max * c / (m * nv).powi(2)) * ddelta * lv_outer;
    let f26 = -(t_max / (m * nv)) * ddelta * lam_v;
    let f33 = (t_max / (m * m)) * nv * ddelta;
    // Sign fixed against the finite-difference oracle: d(m_dot)/d(lam_v) is
    // negative along lam_v since larger ||lam_v|| raises S and the burn rate.
    let f35 = -(t_max / (m * nv)) * ddelta * lam_v;
    let f36 = -(t_max / c) * ddelta;
    let f63 = (2.0 * t_max / m.powi(3)) * nv * delta + (t_max * c / m.powi(4)) * nv * nv * ddelta;
    let f65 = -(t_max / (m * m * nv)) * delta * lam_v - (t_max * c / m.powi(3)) * ddelta * lam_v;
    let f66 = -(t_max / (m * m)) * nv * ddelta;

    Ok(ThrustBlocks {
        f23,
        f25,
        f26,
        f33,
        f35,
        f36,
        f63,
        f65,
        f66,
    })
}

/// Analytic Jacobian of [`rhs`] with respect to the augmented state.
pub fn rhs_jacobian(
    z: &CartesianAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<SMatrix<f64, AUG_DIM, AUG_DIM>, DynError> {
    z.validate()?;
    let blocks = thrust_blocks(&z.lam_v, z.m, z.lam_m, params, cfg)?;
    let mu = params.mu;
    let r = z.r;
    let lam_v = z.lam_v;
    let rn = r.norm();
    let r3 = rn.powi(3);
    let r5 = rn.powi(5);
    let r7 = rn.powi(7);
    let eye = Matrix3::identity();
    let r_outer = r * r.transpose();
    let r_dot_lv = r.dot(&lam_v);

    // Gravity-gradient block d(v_dot)/dr.
    let f21 = 3.0 * mu / r5 * r_outer - mu / r3 * eye;
    // d(lam_r_dot)/dr.
    let f41 = 15.0 * mu * r_dot_lv / r7 * r_outer
        - 3.0 * mu * r_dot_lv / r5 * eye
        - 3.0 * mu / r5 * (r * lam_v.transpose())
        - 3.0 * mu / r5 * (lam_v * r.transpose());
    // d(lam_r_dot)/d(lam_v).
    let f45 = mu / r3 * eye - 3.0 * mu / r5 * r_outer;

    let mut jac = SMatrix::<f64, AUG_DIM, AUG_DIM>::zeros();
    let set3 = |jac: &mut SMatrix<f64, AUG_DIM, AUG_DIM>, row: usize, col: usize, m: &Matrix3<f64>| {
        for i in 0..3 {
            for j in 0..3 {
                jac[(row + i, col + j)] = m[(i, j)];
            }
        }
    };
    let setv = |jac: &mut SMatrix<f64, AUG_DIM, AUG_DIM>, row: usize, col: usize, v: &Vector3<f64>| {
        for i in 0..3 {
            jac[(row + i, col)] = v[i];
        }
    };
    let setr = |jac: &mut SMatrix<f64, AUG_DIM, AUG_DIM>, row: usize, col: usize, v: &Vector3<f64>| {
        for j in 0..3 {
            jac[(row, col + j)] = v[j];
        }
    };

    set3(&mut jac, 0, 3, &eye);
    set3(&mut jac, 3, 0, &f21);
    setv(&mut jac, 3, 6, &blocks.f23);
    set3(&mut jac, 3, 10, &blocks.f25);
    setv(&mut jac, 3, 13, &blocks.f26);
    jac[(6, 6)] = blocks.f33;
    setr(&mut jac, 6, 10, &blocks.f35);
    jac[(6, 13)] = blocks.f36;
    set3(&mut jac, 7, 0, &f41);
    set3(&mut jac, 7, 10, &f45);
    set3(&mut jac, 10, 7, &(-eye));
    jac[(13, 6)] = blocks.f63;
    setr(&mut jac, 13, 10, &blocks.f65);
    jac[(13, 13)] = blocks.f66;

    Ok(jac)
}
