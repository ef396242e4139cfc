//! Carrier plane-wave state of a narrowband matter-wave packet.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PhysicalContext;

/// Carrier wavenumber and the kinematic quantities that follow from the
/// free-particle dispersion relation `omega = hbar k^2 / 2m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierState {
    pub k0: f64,
    pub omega0: f64,
    pub v_group: f64,
    /// Phase velocity of the matter-wave carrier, half the group velocity.
    pub v_phase_carrier: f64,
    /// de Broglie wavelength.
    pub lambda0: f64,
}

impl CarrierState {
    pub fn from_wavenumber(ctx: &PhysicalContext, k0: f64) -> Result<Self> {
        if !(k0 > 0.0) || !k0.is_finite() {
            return Err(Error::invalid("k0", "carrier wavenumber must be positive"));
        }
        let hbar_over_m = ctx.hbar / ctx.mass;
        Ok(Self {
            k0,
            omega0: 0.5 * hbar_over_m * k0 * k0,
            v_group: hbar_over_m * k0,
            v_phase_carrier: 0.5 * hbar_over_m * k0,
            lambda0: 2.0 * PI / k0,
        })
    }

    /// Carrier for a particle moving at group velocity `v` (nonrelativistic).
    pub fn from_velocity(ctx: &PhysicalContext, v: f64) -> Result<Self> {
        Self::from_wavenumber(ctx, ctx.mass * v / ctx.hbar)
    }

    /// Carrier for a nonrelativistic kinetic energy `m v^2 / 2`.
    pub fn from_kinetic_energy(ctx: &PhysicalContext, energy: f64) -> Result<Self> {
        if !(energy > 0.0) {
            return Err(Error::invalid("kinetic_energy", "must be positive"));
        }
        Self::from_wavenumber(ctx, (2.0 * ctx.mass * energy).sqrt() / ctx.hbar)
    }

    pub fn kinetic_energy(&self, ctx: &PhysicalContext) -> f64 {
        0.5 * ctx.mass * self.v_group * self.v_group
    }
}
