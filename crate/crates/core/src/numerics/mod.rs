//! Numerical machinery: adaptive integration, state-transition-matrix
//! propagation, and a hybrid dog-leg root finder.

pub mod dogleg;
pub mod dop853;

pub use dogleg::{JacobianMode, RootReport, RootSolveConfig, Termination};
pub use dop853::{integrate, integrate_with_samples, IntegratorConfig, OdeError, RhsError};

use crate::AUG_DIM;
use nalgebra::SMatrix;

/// State transition matrix of the augmented state-costate system.
pub type StmMatrix = SMatrix<f64, AUG_DIM, AUG_DIM>;

/// Number of equations when the flattened STM rides along with the state.
pub const STM_SYSTEM_DIM: usize = AUG_DIM + AUG_DIM * AUG_DIM;

/// Propagate the augmented state together with its state transition matrix.
///
/// The sensitivity obeys dPhi/dt = (dGamma/dz) Phi with Phi(t0, t0) = I; the
/// matrix is flattened row-major into 196 extra state entries and the whole
/// 210-vector shares one step-size control.
pub fn integrate_with_stm<F, J>(
    mut rhs: F,
    mut jac: J,
    z0: &[f64; AUG_DIM],
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
) -> Result<([f64; AUG_DIM], StmMatrix), OdeError>
where
    F: FnMut(f64, &[f64; AUG_DIM]) -> Result<[f64; AUG_DIM], RhsError>,
    J: FnMut(f64, &[f64; AUG_DIM]) -> Result<StmMatrix, RhsError>,
{
    let mut y0 = [0.0; STM_SYSTEM_DIM];
    y0[..AUG_DIM].copy_from_slice(z0);
    for i in 0..AUG_DIM {
        y0[AUG_DIM + i * AUG_DIM + i] = 1.0;
    }

    let f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), RhsError> {
        let z: &[f64; AUG_DIM] = y[..AUG_DIM].try_into().expect("aug state slice");
        let dz = rhs(t, z)?;
        dy[..AUG_DIM].copy_from_slice(&dz);
        let a = jac(t, z)?;
        let phi = &y[AUG_DIM..];
        let dphi = &mut dy[AUG_DIM..];
        for i in 0..AUG_DIM {
            for j in 0..AUG_DIM {
                let mut acc = 0.0;
                for l in 0..AUG_DIM {
                    acc += a[(i, l)] * phi[l * AUG_DIM + j];
                }
                dphi[i * AUG_DIM + j] = acc;
            }
        }
        Ok(())
    };

    let yf = dop853::integrate(f, &y0, t0, tf, cfg)?;
    let mut zf = [0.0; AUG_DIM];
    zf.copy_from_slice(&yf[..AUG_DIM]);
    let phi = StmMatrix::from_fn(|i, j| yf[AUG_DIM + i * AUG_DIM + j]);
    Ok((zf, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AUG_DIM;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scaling-and-squaring Taylor matrix exponential (test oracle).
    fn matrix_exp(a: &StmMatrix) -> StmMatrix {
        let norm = a.abs().max();
        let scalings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let b = a / 2f64.powi(scalings);
        let mut term = StmMatrix::identity();
        let mut sum = StmMatrix::identity();
        for k in 1..=24 {
            term = (term * b) / k as f64;
            sum += term;
        }
        for _ in 0..scalings {
            sum = sum * sum;
        }
        sum
    }

    fn random_matrix(seed: u64, scale: f64) -> StmMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StmMatrix::from_fn(|_, _| rng.gen_range(-scale..scale))
    }

    #[test]
    fn stm_identity_at_zero_span() {
        let a = random_matrix(1, 0.3);
        let z0 = [0.5; AUG_DIM];
        let (_, phi) = integrate_with_stm(
            |_t, z| {
                let mut dz = [0.0; AUG_DIM];
                for i in 0..AUG_DIM {
                    for j in 0..AUG_DIM {
                        dz[i] += a[(i, j)] * z[j];
                    }
                }
                Ok(dz)
            },
            |_t, _z| Ok(a),
            &z0,
            0.0,
            0.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!((phi - StmMatrix::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn stm_of_linear_system_is_matrix_exponential() {
        let a = random_matrix(7, 0.25);
        let z0 = [0.1; AUG_DIM];
        let tf = 1.3;
        let (_, phi) = integrate_with_stm(
            |_t, z| {
                let mut dz = [0.0; AUG_DIM];
                for i in 0..AUG_DIM {
                    for j in 0..AUG_DIM {
                        dz[i] += a[(i, j)] * z[j];
                    }
                }
                Ok(dz)
            },
            |_t, _z| Ok(a),
            &z0,
            0.0,
            tf,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let oracle = matrix_exp(&(a * tf));
        assert!(
            (phi - oracle).abs().max() < 1e-10,
            "max diff {}",
            (phi - oracle).abs().max()
        );
    }
}
