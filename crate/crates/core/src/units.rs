//! Canonical unit systems and spacecraft physical parameters.
//!
//! All numerics in this crate run on nondimensional quantities. A
//! [`CanonicalScale`] fixes the length, time and mass units and carries the
//! gravitational parameter expressed in those units; boundary data are
//! converted once, up front, and results are redimensionalized for reporting.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity used for the exhaust-velocity relation c = Isp * g0, in m/s².
pub const G0_M_S2: f64 = 9.80665;

/// Solar gravitational parameter, km³/s².
pub const MU_SUN_KM3_S2: f64 = 132_712_440_018.0;

/// Astronomical unit, km.
pub const AU_KM: f64 = 1.496e8;

/// Heliocentric time unit, s (one Julian-year-like unit of 3.1536e7 s).
pub const HELIO_TU_S: f64 = 3.1536e7;

/// Seconds per day.
pub const DAY_S: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitsError {
    #[error("nonpositive unit or parameter: {0}")]
    NonPositive(&'static str),
}

/// A canonical (nondimensional) unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalScale {
    /// km per length unit.
    pub length_unit_km: f64,
    /// s per time unit.
    pub time_unit_s: f64,
    /// kg per mass unit.
    pub mass_unit_kg: f64,
    /// Gravitational parameter in LU³/TU².
    pub mu_canonical: f64,
}

impl CanonicalScale {
    /// Heliocentric scale: LU = 1 AU, TU = 3.1536e7 s, mass unit = the
    /// problem's initial mass so that m(t0) = 1.
    pub fn heliocentric(mass_unit_kg: f64) -> Result<Self, UnitsError> {
        Self::new(AU_KM, HELIO_TU_S, mass_unit_kg, MU_SUN_KM3_S2)
    }

    /// Scale with mu_canonical = 1 exactly: the time unit is derived as
    /// sqrt(LU³/mu).
    pub fn mu_one(
        mu_body_km3_s2: f64,
        length_unit_km: f64,
        mass_unit_kg: f64,
    ) -> Result<Self, UnitsError> {
        if mu_body_km3_s2 <= 0.0 {
            return Err(UnitsError::NonPositive("mu_body"));
        }
        if length_unit_km <= 0.0 {
            return Err(UnitsError::NonPositive("length_unit"));
        }
        let time_unit_s = (length_unit_km.powi(3) / mu_body_km3_s2).sqrt();
        let mut scale = Self::new(length_unit_km, time_unit_s, mass_unit_kg, mu_body_km3_s2)?;
        // The construction above reproduces unity only up to roundoff.
        scale.mu_canonical = 1.0;
        Ok(scale)
    }

    /// General constructor; mu_canonical is computed from the physical
    /// gravitational parameter.
    pub fn new(
        length_unit_km: f64,
        time_unit_s: f64,
        mass_unit_kg: f64,
        mu_body_km3_s2: f64,
    ) -> Result<Self, UnitsError> {
        if length_unit_km <= 0.0 {
            return Err(UnitsError::NonPositive("length_unit"));
        }
        if time_unit_s <= 0.0 {
            return Err(UnitsError::NonPositive("time_unit"));
        }
        if mass_unit_kg <= 0.0 {
            return Err(UnitsError::NonPositive("mass_unit"));
        }
        if mu_body_km3_s2 <= 0.0 {
            return Err(UnitsError::NonPositive("mu_body"));
        }
        Ok(Self {
            length_unit_km,
            time_unit_s,
            mass_unit_kg,
            mu_canonical: mu_body_km3_s2 * time_unit_s * time_unit_s / length_unit_km.powi(3),
        })
    }

    /// km/s per velocity unit (LU/TU).
    pub fn velocity_unit_km_s(&self) -> f64 {
        self.length_unit_km / self.time_unit_s
    }

    pub fn nondim_position(&self, r_km: Vector3<f64>) -> Vector3<f64> {
        r_km / self.length_unit_km
    }

    pub fn dim_position_km(&self, r: Vector3<f64>) -> Vector3<f64> {
        r * self.length_unit_km
    }

    pub fn nondim_velocity(&self, v_km_s: Vector3<f64>) -> Vector3<f64> {
        v_km_s / self.velocity_unit_km_s()
    }

    pub fn dim_velocity_km_s(&self, v: Vector3<f64>) -> Vector3<f64> {
        v * self.velocity_unit_km_s()
    }

    pub fn nondim_mass(&self, m_kg: f64) -> f64 {
        m_kg / self.mass_unit_kg
    }

    pub fn dim_mass_kg(&self, m: f64) -> f64 {
        m * self.mass_unit_kg
    }

    pub fn nondim_time(&self, t_s: f64) -> f64 {
        t_s / self.time_unit_s
    }

    pub fn dim_time_s(&self, t: f64) -> f64 {
        t * self.time_unit_s
    }

    pub fn nondimensionalize(&self, state: &PhysicalState) -> CanonicalState {
        CanonicalState {
            r: self.nondim_position(state.r_km),
            v: self.nondim_velocity(state.v_km_s),
            m: self.nondim_mass(state.m_kg),
        }
    }

    pub fn redimensionalize(&self, state: &CanonicalState) -> PhysicalState {
        PhysicalState {
            r_km: self.dim_position_km(state.r),
            v_km_s: self.dim_velocity_km_s(state.v),
            m_kg: self.dim_mass_kg(state.m),
        }
    }
}

/// A Cartesian state in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalState {
    pub r_km: Vector3<f64>,
    pub v_km_s: Vector3<f64>,
    pub m_kg: f64,
}

/// A Cartesian state in canonical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub m: f64,
}

/// Spacecraft and central-body physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacecraftParams {
    /// Initial mass, kg.
    pub m0_kg: f64,
    /// Specific impulse, s.
    pub isp_s: f64,
    /// Maximum thrust, N.
    pub t_max_n: f64,
    /// Central-body gravitational parameter, km³/s².
    pub mu_body_km3_s2: f64,
}

impl SpacecraftParams {
    pub fn validate(&self) -> Result<(), UnitsError> {
        if self.m0_kg <= 0.0 {
            return Err(UnitsError::NonPositive("m0"));
        }
        if self.isp_s <= 0.0 {
            return Err(UnitsError::NonPositive("isp"));
        }
        if self.t_max_n < 0.0 {
            return Err(UnitsError::NonPositive("t_max"));
        }
        if self.mu_body_km3_s2 <= 0.0 {
            return Err(UnitsError::NonPositive("mu_body"));
        }
        Ok(())
    }

    /// Effective exhaust velocity c = Isp * g0, km/s.
    pub fn exhaust_velocity_km_s(&self) -> f64 {
        self.isp_s * G0_M_S2 * 1e-3
    }

    /// Express the dynamical parameters in the given canonical scale.
    pub fn to_canonical(&self, scale: &CanonicalScale) -> CanonicalParams {
        // N = kg·m/s²; the canonical force unit is MU·LU/TU².
        let force_unit_n = scale.mass_unit_kg * scale.length_unit_km * 1e3
            / (scale.time_unit_s * scale.time_unit_s);
        CanonicalParams {
            mu: self.mu_body_km3_s2 * scale.time_unit_s * scale.time_unit_s
                / scale.length_unit_km.powi(3),
            t_max: self.t_max_n / force_unit_n,
            c: self.exhaust_velocity_km_s() / scale.velocity_unit_km_s(),
        }
    }
}

/// Dynamical parameters in canonical units, consumed by the dynamics
/// backends. For the restricted three-body backend `mu` is the mass ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    pub mu: f64,
    pub t_max: f64,
    pub c: f64,
}
