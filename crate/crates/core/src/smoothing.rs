//! Throttle smoothing laws.
//!
//! The minimum-principle throttle is bang-bang in the switching function S.
//! Both smoothing families map S through a squashing curve controlled by a
//! parameter rho, recovering the sharp profile as rho -> 0:
//!
//! - hyperbolic tangent: delta = 0.5 [1 + tanh(S/rho)],
//! - L2 norm:            delta = 0.5 [1 + S / sqrt(S² + rho²)].

use crate::dual::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Beyond this magnitude of S/rho the tanh law is saturated to exactly 0 or 1
/// (and its derivative to 0). rho = 1e-5 with S of order one would otherwise
/// push huge arguments through tanh/sech.
const TANH_SATURATION: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothingError {
    #[error("smoothing parameter rho must be positive, got {0}")]
    NonPositiveRho(f64),
}

/// Smoothing family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothingKind {
    HyperbolicTangent,
    L2Norm,
}

/// A smoothing family together with its sharpness parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub kind: SmoothingKind,
    pub rho: f64,
}

impl SmoothingConfig {
    pub fn new(kind: SmoothingKind, rho: f64) -> Result<Self, SmoothingError> {
        if !(rho > 0.0) {
            return Err(SmoothingError::NonPositiveRho(rho));
        }
        Ok(Self { kind, rho })
    }
}

/// Smoothed throttle, strictly inside (0,1) except in the saturated tail.
pub fn throttle(s: f64, cfg: &SmoothingConfig) -> f64 {
    throttle_generic(s, cfg.kind, cfg.rho)
}

/// d(delta)/dS for the configured smoothing law.
pub fn throttle_derivative(s: f64, cfg: &SmoothingConfig) -> f64 {
    match cfg.kind {
        SmoothingKind::HyperbolicTangent => {
            let x = s / cfg.rho;
            if x.abs() > TANH_SATURATION {
                0.0
            } else {
                // 0.5/rho sech²(S/rho), written via tanh to avoid cosh overflow.
                let t = x.tanh();
                0.5 / cfg.rho * (1.0 - t * t)
            }
        }
        SmoothingKind::L2Norm => {
            let d = s * s + cfg.rho * cfg.rho;
            0.5 * cfg.rho * cfg.rho / (d * d.sqrt())
        }
    }
}

/// Throttle evaluated on any [`Scalar`], so dual numbers differentiate the
/// dynamics through the smoothing law.
pub fn throttle_generic<T: Scalar>(s: T, kind: SmoothingKind, rho: f64) -> T {
    let half = T::from_f64(0.5);
    match kind {
        SmoothingKind::HyperbolicTangent => {
            let x = s / T::from_f64(rho);
            if x.value() > TANH_SATURATION {
                T::one()
            } else if x.value() < -TANH_SATURATION {
                T::zero()
            } else {
                half * (T::one() + x.tanh())
            }
        }
        SmoothingKind::L2Norm => {
            let rho_t = T::from_f64(rho);
            half * (T::one() + s / (s * s + rho_t * rho_t).sqrt())
        }
    }
}

/// The rho -> 0 limit of either law: 1 for S > 0, 0 for S < 0, with the
/// measure-zero S = 0 mapped to 1. Used only to report thrust-arc structure.
pub fn hard_throttle(s: f64) -> f64 {
    if s >= 0.0 {
        1.0
    } else {
        0.0
    }
}
