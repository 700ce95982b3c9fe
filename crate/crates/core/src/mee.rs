//! Modified-equinoctial-element dynamics and conversions.
//!
//! Elements are (p, f, g, h, k, L) with q = 1 + f cos L + g sin L and
//! s² = 1 + h² + k², under the canonical scaling mu = 1. The costate rates
//! are the exact gradient of the control-substituted Hamiltonian, produced by
//! forward-mode dual numbers rather than hand expansion; nesting the duals
//! yields the exact Jacobian of the augmented right-hand side.

use crate::cartesian::ControlEval;
use crate::dual::{DualN, Scalar};
use crate::smoothing::{self, SmoothingConfig};
use crate::units::CanonicalParams;
use crate::{DynError, AUG_DIM, COSTATE_NORM_FLOOR};
use nalgebra::{SMatrix, SVector, Vector3};

/// The six equinoctial elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeeElements {
    pub p: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub k: f64,
    pub l: f64,
}

impl MeeElements {
    pub fn to_array(&self) -> [f64; 6] {
        [self.p, self.f, self.g, self.h, self.k, self.l]
    }

    pub fn from_array(x: &[f64; 6]) -> Self {
        Self {
            p: x[0],
            f: x[1],
            g: x[2],
            h: x[3],
            k: x[4],
            l: x[5],
        }
    }
}

/// Augmented equinoctial state-costate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeeAugState {
    pub elements: MeeElements,
    pub m: f64,
    pub lam: SVector<f64, 6>,
    pub lam_m: f64,
}

impl MeeAugState {
    pub fn from_array(z: &[f64; AUG_DIM]) -> Self {
        Self {
            elements: MeeElements {
                p: z[0],
                f: z[1],
                g: z[2],
                h: z[3],
                k: z[4],
                l: z[5],
            },
            m: z[6],
            lam: SVector::from_row_slice(&z[7..13]),
            lam_m: z[13],
        }
    }

    pub fn to_array(&self) -> [f64; AUG_DIM] {
        let e = &self.elements;
        [
            e.p, e.f, e.g, e.h, e.k, e.l, self.m, self.lam[0], self.lam[1], self.lam[2],
            self.lam[3], self.lam[4], self.lam[5], self.lam_m,
        ]
    }
}

/// Classical elements (a, e, i, raan, argp, true anomaly) to MEE.
pub fn coe_to_mee(
    a: f64,
    e: f64,
    i: f64,
    raan: f64,
    argp: f64,
    nu: f64,
) -> Result<MeeElements, DynError> {
    if e < 0.0 {
        return Err(DynError::InvalidState("eccentricity must be non-negative"));
    }
    if !(0.0..std::f64::consts::PI).contains(&i) {
        return Err(DynError::InvalidState(
            "inclination must lie in [0, pi); i = pi is singular for MEE",
        ));
    }
    let p = a * (1.0 - e * e);
    if !(p > 0.0) {
        return Err(DynError::InvalidState("semi-latus rectum must be positive"));
    }
    let ti2 = (i / 2.0).tan();
    Ok(MeeElements {
        p,
        f: e * (argp + raan).cos(),
        g: e * (argp + raan).sin(),
        h: ti2 * raan.cos(),
        k: ti2 * raan.sin(),
        l: nu + argp + raan,
    })
}

/// Orthonormal in-plane axes of the equinoctial frame; true longitude L is
/// the in-plane angle from `f_hat`.
fn equinoctial_basis(h: f64, k: f64) -> (Vector3<f64>, Vector3<f64>) {
    let s2 = 1.0 + h * h + k * k;
    let f_hat = Vector3::new(1.0 + h * h - k * k, 2.0 * h * k, -2.0 * k) / s2;
    let g_hat = Vector3::new(2.0 * h * k, 1.0 - h * h + k * k, 2.0 * h) / s2;
    (f_hat, g_hat)
}

/// MEE to Cartesian position/velocity.
pub fn mee_to_cartesian(el: &MeeElements, mu: f64) -> Result<(Vector3<f64>, Vector3<f64>), DynError> {
    if !(el.p > 0.0) {
        return Err(DynError::InvalidState("semi-latus rectum must be positive"));
    }
    let (f_hat, g_hat) = equinoctial_basis(el.h, el.k);
    let (sl, cl) = el.l.sin_cos();
    let q = 1.0 + el.f * cl + el.g * sl;
    if !(q > 0.0) {
        return Err(DynError::InvalidState("q = 1 + f cosL + g sinL must be positive"));
    }
    let r = (el.p / q) * (cl * f_hat + sl * g_hat);
    let v = (mu / el.p).sqrt() * (-(sl + el.g) * f_hat + (cl + el.f) * g_hat);
    Ok((r, v))
}

/// Cartesian position/velocity to MEE.
pub fn cartesian_to_mee(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    mu: f64,
) -> Result<MeeElements, DynError> {
    let h_vec = r.cross(v);
    let h_norm = h_vec.norm();
    if h_norm < 1e-12 * r.norm().max(1.0) * v.norm().max(1.0) {
        return Err(DynError::InvalidState(
            "rectilinear orbit: angular momentum vanishes",
        ));
    }
    let h_hat = h_vec / h_norm;
    if h_hat.z <= -1.0 + 1e-12 {
        return Err(DynError::InvalidState(
            "retrograde equatorial orbit is singular for MEE",
        ));
    }
    // tan(i/2) decomposition of the orbit normal.
    let hh = -h_hat.y / (1.0 + h_hat.z);
    let kk = h_hat.x / (1.0 + h_hat.z);

    let p = h_norm * h_norm / mu;
    let e_vec = v.cross(&h_vec) / mu - r / r.norm();
    let (f_hat, g_hat) = equinoctial_basis(hh, kk);
    let f = e_vec.dot(&f_hat);
    let g = e_vec.dot(&g_hat);
    let l = r.dot(&g_hat).atan2(r.dot(&f_hat));
    Ok(MeeElements {
        p,
        f,
        g,
        h: hh,
        k: kk,
        l,
    })
}

/// Ballistic drift vector: only the true longitude advances.
fn a_vector_l<T: Scalar>(p: T, q: T) -> T {
    p.sqrt() * (q / p).powi(2)
}

/// Control influence matrix, rows (p, f, g, h, k, L), columns
/// (radial, transverse, normal); canonical mu = 1.
fn b_matrix<T: Scalar>(p: T, f: T, g: T, h: T, k: T, l: T) -> [[T; 3]; 6] {
    let zero = T::zero();
    let one = T::one();
    let two = T::from_f64(2.0);
    let sl = l.sin();
    let cl = l.cos();
    let q = one + f * cl + g * sl;
    let sp = p.sqrt();
    let s2 = one + h * h + k * k;
    let hk = h * sl - k * cl;

    [
        [zero, two * p / q * sp, zero],
        [
            sp * sl,
            sp / q * ((q + one) * cl + f),
            -(sp * g / q) * hk,
        ],
        [
            -(sp * cl),
            sp / q * ((q + one) * sl + g),
            sp * f / q * hk,
        ],
        [zero, zero, sp * s2 * cl / (two * q)],
        [zero, zero, sp * s2 * sl / (two * q)],
        [zero, zero, sp / q * hk],
    ]
}

/// Control-substituted Hamiltonian, H = lam_L * A_L - (Tmax/c) S delta(S).
///
/// The extremal direction and the smoothed throttle are substituted before
/// differentiation, so gradients of this function include the control law's
/// dependence on state and costate.
fn hamiltonian_generic<T: Scalar>(
    z: &[T; AUG_DIM],
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> T {
    let (p, f, g, h, k, l, m) = (z[0], z[1], z[2], z[3], z[4], z[5], z[6]);
    let lam = [z[7], z[8], z[9], z[10], z[11], z[12]];
    let lam_m = z[13];
    let one = T::one();
    let q = one + f * l.cos() + g * l.sin();

    let b = b_matrix(p, f, g, h, k, l);
    let mut w = [T::zero(); 3];
    for (i, row) in b.iter().enumerate() {
        for (j, w_j) in w.iter_mut().enumerate() {
            *w_j = *w_j + row[j] * lam[i];
        }
    }
    let w_sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let n = if w_sq.value() > COSTATE_NORM_FLOOR * COSTATE_NORM_FLOOR {
        w_sq.sqrt()
    } else {
        T::zero()
    };

    let c = T::from_f64(params.c);
    let t_max_over_c = T::from_f64(params.t_max / params.c);
    let s = c * n / m + lam_m - one;
    let delta = smoothing::throttle_generic(s, cfg.kind, cfg.rho);
    lam[5] * a_vector_l(p, q) - t_max_over_c * s * delta
}

fn validate_values<T: Scalar>(z: &[T; AUG_DIM]) -> Result<(), DynError> {
    let p = z[0].value();
    let q = 1.0 + z[1].value() * z[5].value().cos() + z[2].value() * z[5].value().sin();
    if !(p > 0.0) {
        return Err(DynError::InvalidState("semi-latus rectum must be positive"));
    }
    if !(q > 0.0) {
        return Err(DynError::InvalidState("q = 1 + f cosL + g sinL must be positive"));
    }
    if !(z[6].value() > 0.0) {
        return Err(DynError::InvalidState("mass must be positive"));
    }
    Ok(())
}

/// Augmented right-hand side over any scalar type. State rates follow the
/// equations of motion with the smoothed extremal control substituted;
/// costate rates are the exact gradient -dH/d(x, m) obtained from an inner
/// layer of dual numbers.
fn rhs_generic<T: Scalar>(
    z: &[T; AUG_DIM],
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<[T; AUG_DIM], DynError> {
    validate_values(z)?;
    let (p, f, g, h, k, l, m) = (z[0], z[1], z[2], z[3], z[4], z[5], z[6]);
    let lam = [z[7], z[8], z[9], z[10], z[11], z[12]];
    let one = T::one();
    let q = one + f * l.cos() + g * l.sin();

    let b = b_matrix(p, f, g, h, k, l);
    let mut w = [T::zero(); 3];
    for (i, row) in b.iter().enumerate() {
        for (j, w_j) in w.iter_mut().enumerate() {
            *w_j = *w_j + row[j] * lam[i];
        }
    }
    let w_sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let degenerate = !(w_sq.value() > COSTATE_NORM_FLOOR * COSTATE_NORM_FLOOR);
    let (alpha, n) = if degenerate {
        ([one, T::zero(), T::zero()], T::zero())
    } else {
        let n = w_sq.sqrt();
        ([-(w[0] / n), -(w[1] / n), -(w[2] / n)], n)
    };

    let c = T::from_f64(params.c);
    let t_max = T::from_f64(params.t_max);
    let s = c * n / m + z[13] - one;
    let delta = smoothing::throttle_generic(s, cfg.kind, cfg.rho);
    let coef = t_max / m * delta;

    let mut out = [T::zero(); AUG_DIM];
    for (i, row) in b.iter().enumerate() {
        out[i] = row[0] * alpha[0] * coef + row[1] * alpha[1] * coef + row[2] * alpha[2] * coef;
    }
    out[5] = out[5] + a_vector_l(p, q);
    out[6] = -(t_max / c) * delta;

    // Costate rates: inner dual layer seeds (x, m).
    let mut zd: [DualN<T, 7>; AUG_DIM] = std::array::from_fn(|i| DualN::constant(z[i]));
    for (dir, zi) in zd.iter_mut().take(7).enumerate() {
        zi.eps[dir] = T::one();
    }
    let ham = hamiltonian_generic(&zd, params, cfg);
    for i in 0..6 {
        out[7 + i] = -ham.eps[i];
    }
    out[13] = -ham.eps[6];

    Ok(out)
}

/// Augmented right-hand side dz/dt.
pub fn mee_rhs(
    z: &MeeAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<[f64; AUG_DIM], DynError> {
    rhs_generic(&z.to_array(), params, cfg)
}

/// Control-substituted Hamiltonian value.
pub fn mee_hamiltonian(
    z: &MeeAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<f64, DynError> {
    let za = z.to_array();
    validate_values(&za)?;
    Ok(hamiltonian_generic(&za, params, cfg))
}

/// Extremal control: the primer direction modulated by the control influence
/// matrix, expressed in the (radial, transverse, normal) frame.
pub fn mee_control(
    z: &MeeAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> ControlEval {
    let e = &z.elements;
    let b = b_matrix(e.p, e.f, e.g, e.h, e.k, e.l);
    let mut w: Vector3<f64> = Vector3::zeros();
    for (i, row) in b.iter().enumerate() {
        for j in 0..3 {
            w[j] += row[j] * z.lam[i];
        }
    }
    let n = w.norm();
    let (alpha_hat, degenerate) = if n > COSTATE_NORM_FLOOR {
        (-w / n, false)
    } else {
        (Vector3::new(1.0, 0.0, 0.0), true)
    };
    let s = params.c * n / z.m + z.lam_m - 1.0;
    ControlEval {
        alpha_hat,
        delta: smoothing::throttle(s, cfg),
        s,
        degenerate,
    }
}

/// Exact Jacobian of [`mee_rhs`] via an outer layer of dual numbers.
pub fn mee_rhs_jacobian(
    z: &MeeAugState,
    params: &CanonicalParams,
    cfg: &SmoothingConfig,
) -> Result<SMatrix<f64, AUG_DIM, AUG_DIM>, DynError> {
    let za = z.to_array();
    let zd: [DualN<f64, AUG_DIM>; AUG_DIM] =
        std::array::from_fn(|i| DualN::variable(za[i], i));
    let out = rhs_generic(&zd, params, cfg)?;
    Ok(SMatrix::from_fn(|i, j| out[i].eps[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::SmoothingKind;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> CanonicalParams {
        CanonicalParams {
            mu: 1.0,
            t_max: 0.15,
            c: 1.2,
        }
    }

    fn cfg(rho: f64) -> SmoothingConfig {
        SmoothingConfig::new(SmoothingKind::L2Norm, rho).unwrap()
    }

    fn random_aug(rng: &mut ChaCha8Rng) -> MeeAugState {
        MeeAugState {
            elements: MeeElements {
                p: rng.gen_range(0.5..3.0),
                f: rng.gen_range(-0.3..0.3),
                g: rng.gen_range(-0.3..0.3),
                h: rng.gen_range(-0.5..0.5),
                k: rng.gen_range(-0.5..0.5),
                l: rng.gen_range(0.0..30.0),
            },
            m: rng.gen_range(0.4..1.0),
            lam: SVector::<f64, 6>::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
            lam_m: rng.gen_range(0.0..1.0),
        }
    }

    #[test]
    fn coe_zero_eccentricity_inclination() {
        let el = coe_to_mee(1.0, 0.0, 0.0, 0.0, 0.0, 0.3).unwrap();
        assert_eq!(el.p, 1.0);
        assert_eq!(el.f, 0.0);
        assert_eq!(el.g, 0.0);
        assert_eq!(el.h, 0.0);
        assert_eq!(el.k, 0.0);
        assert_relative_eq!(el.l, 0.3, max_relative = 1e-15);
    }

    #[test]
    fn coe_direct_substitution() {
        let el = coe_to_mee(2.0, 0.5, 0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        assert_relative_eq!(el.p, 1.5, max_relative = 1e-15);
        assert_abs_diff_eq!(el.f, 0.0, epsilon = 1e-15);
        assert_relative_eq!(el.g, 0.5, max_relative = 1e-15);
        assert_relative_eq!(el.l, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
    }

    #[test]
    fn coe_rejects_singular_inclination() {
        assert!(coe_to_mee(1.0, 0.1, std::f64::consts::PI, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn circular_equatorial_cartesian_roundtrip() {
        let el = cartesian_to_mee(
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.0, 1.0, 0.0),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(el.p, 1.0, max_relative = 1e-14);
        assert_abs_diff_eq!(el.f, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(el.g, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(el.h, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(el.k, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(el.l, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rectilinear_rejected() {
        assert!(cartesian_to_mee(
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.5, 0.0, 0.0),
            1.0
        )
        .is_err());
    }

    #[test]
    fn roundtrip_random_elliptic_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let r = Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
            );
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.5),
            );
            if r.norm() < 0.2 || r.cross(&v).norm() < 0.1 {
                continue;
            }
            // Keep orbits elliptic.
            if v.norm_squared() / 2.0 - 1.0 / r.norm() > -0.05 {
                continue;
            }
            let el = cartesian_to_mee(&r, &v, 1.0).unwrap();
            let (r2, v2) = mee_to_cartesian(&el, 1.0).unwrap();
            assert!(
                (r2 - r).norm() <= 1e-10 * r.norm().max(1.0),
                "r {r:?} vs {r2:?}"
            );
            assert!(
                (v2 - v).norm() <= 1e-10 * v.norm().max(1.0),
                "v {v:?} vs {v2:?}"
            );
        }
    }

    #[test]
    fn coe_and_cartesian_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = rng.gen_range(0.8..3.0);
            let e = rng.gen_range(0.0..0.6);
            let i = rng.gen_range(0.0..2.8);
            let raan = rng.gen_range(-3.0..3.0);
            let argp = rng.gen_range(-3.0..3.0);
            let nu = rng.gen_range(-3.0..3.0);
            let el = coe_to_mee(a, e, i, raan, argp, nu).unwrap();
            let (r, v) = mee_to_cartesian(&el, 1.0).unwrap();
            let el2 = cartesian_to_mee(&r, &v, 1.0).unwrap();
            assert_relative_eq!(el.p, el2.p, max_relative = 1e-10);
            assert_abs_diff_eq!(el.f, el2.f, epsilon = 1e-10);
            assert_abs_diff_eq!(el.g, el2.g, epsilon = 1e-10);
            assert_abs_diff_eq!(el.h, el2.h, epsilon = 1e-10);
            assert_abs_diff_eq!(el.k, el2.k, epsilon = 1e-10);
            // L agrees modulo 2 pi.
            let dl = (el.l - el2.l).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(dl < 1e-9 || dl > 2.0 * std::f64::consts::PI - 1e-9, "dl {dl}");
        }
    }

    #[test]
    fn ballistic_circular_orbit_rates() {
        let z = MeeAugState {
            elements: MeeElements {
                p: 1.0,
                f: 0.0,
                g: 0.0,
                h: 0.0,
                k: 0.0,
                l: 0.7,
            },
            m: 1.0,
            lam: SVector::zeros(),
            lam_m: 0.0,
        };
        let p = CanonicalParams {
            mu: 1.0,
            t_max: 0.0,
            c: 1.0,
        };
        let dz = mee_rhs(&z, &p, &cfg(1.0)).unwrap();
        for (i, d) in dz.iter().enumerate() {
            if i == 5 {
                assert_relative_eq!(*d, 1.0, max_relative = 1e-14);
            } else {
                assert_abs_diff_eq!(*d, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn control_single_costate_direction() {
        let z = MeeAugState {
            elements: MeeElements {
                p: 1.3,
                f: 0.0,
                g: 0.0,
                h: 0.0,
                k: 0.0,
                l: 0.4,
            },
            m: 1.0,
            lam: SVector::from_row_slice(&[0.2, 0.0, 0.0, 0.0, 0.0, 0.0]),
            lam_m: 0.0,
        };
        let ctrl = mee_control(&z, &params(), &cfg(1.0));
        assert_abs_diff_eq!(
            ctrl.alpha_hat,
            Vector3::new(0.0, -1.0, 0.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn zero_costate_coasts() {
        let z = MeeAugState {
            elements: MeeElements {
                p: 1.0,
                f: 0.0,
                g: 0.0,
                h: 0.0,
                k: 0.0,
                l: 0.0,
            },
            m: 1.0,
            lam: SVector::zeros(),
            lam_m: 0.0,
        };
        let ctrl = mee_control(&z, &params(), &cfg(1.0));
        assert_eq!(ctrl.s, -1.0);
        assert!(ctrl.degenerate);
        assert_eq!(smoothing::hard_throttle(ctrl.s), 0.0);
    }

    #[test]
    fn circular_radius_constant_when_f_g_vanish() {
        // q = 1 for any L when f = g = 0, so the radius equals p everywhere.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let el = MeeElements {
                p: 1.7,
                f: 0.0,
                g: 0.0,
                h: 0.2,
                k: -0.1,
                l: rng.gen_range(-10.0..10.0),
            };
            let (r, _) = mee_to_cartesian(&el, 1.0).unwrap();
            assert_relative_eq!(r.norm(), 1.7, max_relative = 1e-14);
        }
    }

    #[test]
    fn costate_rates_match_fd_of_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = params();
        for kind in [SmoothingKind::HyperbolicTangent, SmoothingKind::L2Norm] {
            for _ in 0..50 {
                let c = SmoothingConfig::new(kind, rng.gen_range(0.1..1.0)).unwrap();
                let z = random_aug(&mut rng);
                let dz = mee_rhs(&z, &p, &c).unwrap();
                let za = z.to_array();
                // FD of the substituted Hamiltonian in (x, m).
                for dir in 0..7 {
                    let hstep = 1e-6 * za[dir].abs().max(1.0);
                    let mut zp = za;
                    zp[dir] += hstep;
                    let mut zm = za;
                    zm[dir] -= hstep;
                    let hp = hamiltonian_generic(&zp, &p, &c);
                    let hm = hamiltonian_generic(&zm, &p, &c);
                    let fd = -(hp - hm) / (2.0 * hstep);
                    let an = if dir < 6 { dz[7 + dir] } else { dz[13] };
                    let floor = 1e-9 * hp.abs().max(hm.abs()).max(1.0) / hstep * 1e-6;
                    assert!(
                        (fd - an).abs() <= 1e-7 * an.abs().max(fd.abs()) + floor,
                        "dir {dir}: fd {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = params();
        for _ in 0..30 {
            let c = cfg(rng.gen_range(0.05..1.0));
            let z = random_aug(&mut rng);
            let jac = mee_rhs_jacobian(&z, &p, &c).unwrap();
            let za = z.to_array();
            for col in 0..AUG_DIM {
                let h = 1e-7 * za[col].abs().max(1.0);
                let mut zp = za;
                zp[col] += h;
                let mut zm = za;
                zm[col] -= h;
                let fp = rhs_generic(&zp, &p, &c).unwrap();
                let fm = rhs_generic(&zm, &p, &c).unwrap();
                for row in 0..AUG_DIM {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let an = jac[(row, col)];
                    let floor = 1e-8 * fp[row].abs().max(fm[row].abs()).max(1.0);
                    assert!(
                        (fd - an).abs() <= 5e-6 * an.abs().max(fd.abs()) + floor,
                        "entry ({row},{col}): fd {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn ballistic_jacobian_state_block_sparsity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut z = random_aug(&mut rng);
        z.lam = SVector::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let p = CanonicalParams {
            mu: 1.0,
            t_max: 0.0,
            c: 1.0,
        };
        let jac = mee_rhs_jacobian(&z, &p, &cfg(0.5)).unwrap();
        // Only dL/dt depends on state, through (p, f, g, L).
        for row in 0..6 {
            for col in 0..7 {
                if row == 5 && (col == 0 || col == 1 || col == 2 || col == 5) {
                    continue;
                }
                assert_abs_diff_eq!(jac[(row, col)], 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn b_matrix_sqrt_p_scaling() {
        let (f, g, h, k, l) = (0.1, -0.2, 0.3, 0.2, 1.1);
        let b1 = b_matrix(1.7, f, g, h, k, l);
        let b4 = b_matrix(4.0 * 1.7, f, g, h, k, l);
        for (i, (row1, row4)) in b1.iter().zip(b4.iter()).enumerate() {
            for j in 0..3 {
                if row1[j] == 0.0 {
                    assert_eq!(row4[j], 0.0);
                    continue;
                }
                // Row p scales as p^(3/2); every other entry carries sqrt(p).
                let expected = if i == 0 { 8.0 } else { 2.0 };
                assert_relative_eq!(row4[j] / row1[j], expected, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn rejects_invalid_states() {
        let mut z = MeeAugState {
            elements: MeeElements {
                p: -1.0,
                f: 0.0,
                g: 0.0,
                h: 0.0,
                k: 0.0,
                l: 0.0,
            },
            m: 1.0,
            lam: SVector::zeros(),
            lam_m: 0.0,
        };
        assert!(mee_rhs(&z, &params(), &cfg(1.0)).is_err());
        z.elements.p = 1.0;
        z.elements.f = -1.2;
        assert!(mee_rhs(&z, &params(), &cfg(1.0)).is_err());
    }
}
