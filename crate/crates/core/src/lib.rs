//! Minimum-fuel low-thrust trajectory optimization by indirect methods.
//!
//! The library solves fixed-time rendezvous problems by propagating the
//! state-costate dynamics of the Pontryagin necessary conditions with a
//! smoothed bang-bang throttle, and shooting on the unknown initial costates.
//! Sensitivities of the boundary residual come from the state transition
//! matrix propagated alongside the trajectory, and the sharp (bang-off-bang)
//! control is recovered by numerical continuation on the smoothing parameter.
//!
//! Module map:
//! - [`units`]: canonical unit scales and spacecraft parameters,
//! - [`smoothing`]: throttle smoothing laws and their derivatives,
//! - [`cartesian`]: two-body Cartesian state-costate dynamics,
//! - [`mee`]: modified-equinoctial-element dynamics and conversions,
//! - [`cr3bp`]: circular restricted three-body dynamics,
//! - [`numerics`]: adaptive Runge-Kutta integration, STM propagation and a
//!   dog-leg root finder,
//! - [`shooting`]: boundary-value residuals and the continuation driver,
//! - [`bench`]: benchmark problems, Monte Carlo harness and the CLI.

pub mod bench;
pub mod cartesian;
pub mod cr3bp;
pub mod dual;
pub mod mee;
pub mod numerics;
pub mod shooting;
pub mod smoothing;
pub mod units;

use thiserror::Error;

/// State-costate vector length shared by every dynamics backend:
/// six states, mass, six costates and the mass costate.
pub const AUG_DIM: usize = 14;

/// Below this costate-vector norm the thrust direction is undefined and a
/// fallback axis is substituted.
pub const COSTATE_NORM_FLOOR: f64 = 1e-12;

/// Errors raised by the dynamics right-hand sides.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynError {
    /// The position vector collapsed onto a gravitating body.
    #[error("state at singular radius: {0}")]
    SingularRadius(&'static str),
    /// A state invariant (positive mass, positive semi-latus rectum, ...) is violated.
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    /// The primer vector norm is below [`COSTATE_NORM_FLOOR`] where a
    /// well-defined derivative is required.
    #[error("degenerate costate: thrust direction undefined")]
    DegenerateCostate,
}
