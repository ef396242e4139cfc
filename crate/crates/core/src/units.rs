//! Physical constants, particle contexts and the SI <-> internal unit layer.
//!
//! Internally the simulator works in natural units where the reduced Planck
//! constant and the particle mass are both 1, lengths are measured in a
//! reference length `L_u` (usually the input packet width), time in
//! `T_u = m L_u^2 / hbar` and charge in units of `|q|`. Electron-scale SI
//! numbers (hbar ~ 1e-34) would otherwise lose most of the double precision
//! mantissa in intermediate products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values.
pub mod si {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const PROTON_MASS: f64 = 1.672_621_923_69e-27;
    pub const ELECTRON_VOLT: f64 = ELEMENTARY_CHARGE;
}

/// Physical dimension as integer exponents of (length, time, mass, charge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub length: i32,
    pub time: i32,
    pub mass: i32,
    pub charge: i32,
}

impl Dimension {
    pub const fn new(length: i32, time: i32, mass: i32, charge: i32) -> Self {
        Self {
            length,
            time,
            mass,
            charge,
        }
    }

    pub const DIMENSIONLESS: Self = Self::new(0, 0, 0, 0);
    pub const LENGTH: Self = Self::new(1, 0, 0, 0);
    pub const TIME: Self = Self::new(0, 1, 0, 0);
    pub const MASS: Self = Self::new(0, 0, 1, 0);
    pub const CHARGE: Self = Self::new(0, 0, 0, 1);
    pub const WAVENUMBER: Self = Self::new(-1, 0, 0, 0);
    pub const ANGULAR_FREQUENCY: Self = Self::new(0, -1, 0, 0);
    pub const VELOCITY: Self = Self::new(1, -1, 0, 0);
    pub const ENERGY: Self = Self::new(2, -2, 1, 0);
    pub const ACTION: Self = Self::new(2, -1, 1, 0);
    pub const FORCE: Self = Self::new(1, -2, 1, 0);
    /// Volts.
    pub const POTENTIAL: Self = Self::new(2, -2, 1, -1);
    /// Volts per metre.
    pub const FIELD: Self = Self::new(1, -2, 1, -1);
    /// Volt-seconds per metre.
    pub const VECTOR_POTENTIAL: Self = Self::new(1, -1, 1, -1);
    /// Quadratic spatial phase coefficient, rad/m^2.
    pub const CHIRP: Self = Self::new(-2, 0, 0, 0);
    /// Quadratic spectral phase coefficient, m^2.
    pub const AREA: Self = Self::new(2, 0, 0, 0);
}

/// How the internal numbers of a [`PhysicalContext`] relate to SI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitMode {
    /// Internal quantities are plain SI.
    Si,
    /// Internal quantities are natural units (hbar = m = 1, length unit `L_u`).
    Natural,
}

/// SI magnitudes of the internal base units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub length_m: f64,
    pub time_s: f64,
    pub mass_kg: f64,
    pub charge_c: f64,
}

impl UnitScale {
    pub const IDENTITY: Self = Self {
        length_m: 1.0,
        time_s: 1.0,
        mass_kg: 1.0,
        charge_c: 1.0,
    };

    /// SI value of one internal unit of `dim`.
    pub fn factor(&self, dim: Dimension) -> f64 {
        self.length_m.powi(dim.length)
            * self.time_s.powi(dim.time)
            * self.mass_kg.powi(dim.mass)
            * self.charge_c.powi(dim.charge)
    }

    /// SI value of one internal envelope amplitude unit (m^-1/2).
    pub fn amplitude(&self) -> f64 {
        self.length_m.sqrt().recip()
    }
}

/// Particle constants plus the unit system in which they are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalContext {
    pub hbar: f64,
    pub mass: f64,
    /// Signed particle charge.
    pub charge: f64,
    pub c_light: f64,
    pub unit_mode: UnitMode,
    pub scale: UnitScale,
}

impl PhysicalContext {
    /// Context expressed directly in SI.
    pub fn si(mass_kg: f64, charge_c: f64) -> Result<Self> {
        let ctx = Self {
            hbar: si::HBAR,
            mass: mass_kg,
            charge: charge_c,
            c_light: si::SPEED_OF_LIGHT,
            unit_mode: UnitMode::Si,
            scale: UnitScale::IDENTITY,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Natural-unit context for a particle of the given SI mass and charge,
    /// with `length_unit_m` as the internal unit of length.
    pub fn natural_from_si(mass_kg: f64, charge_c: f64, length_unit_m: f64) -> Result<Self> {
        if !(mass_kg > 0.0) || !mass_kg.is_finite() {
            return Err(Error::invalid("mass", "must be positive"));
        }
        if !(length_unit_m > 0.0) || !length_unit_m.is_finite() {
            return Err(Error::invalid("length_unit", "must be positive"));
        }
        let time_s = mass_kg * length_unit_m * length_unit_m / si::HBAR;
        let charge_unit = if charge_c == 0.0 { 1.0 } else { charge_c.abs() };
        let scale = UnitScale {
            length_m: length_unit_m,
            time_s,
            mass_kg,
            charge_c: charge_unit,
        };
        let ctx = Self {
            hbar: 1.0,
            mass: 1.0,
            charge: charge_c / charge_unit,
            c_light: si::SPEED_OF_LIGHT / scale.factor(Dimension::VELOCITY),
            unit_mode: UnitMode::Natural,
            scale,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Purely dimensionless context (hbar = m = 1, |q| = 1) with the given
    /// charge sign and speed of light. SI conversion is the identity.
    pub fn dimensionless(charge: f64, c_light: f64) -> Result<Self> {
        let ctx = Self {
            hbar: 1.0,
            mass: 1.0,
            charge,
            c_light,
            unit_mode: UnitMode::Natural,
            scale: UnitScale::IDENTITY,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn electron_si() -> Self {
        Self::si(si::ELECTRON_MASS, -si::ELEMENTARY_CHARGE).expect("electron constants are valid")
    }

    fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::invalid("hbar", "must be positive"));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::invalid("mass", "must be positive"));
        }
        if !(self.c_light > 0.0) || !self.c_light.is_finite() {
            return Err(Error::invalid("c_light", "must be positive"));
        }
        if !self.charge.is_finite() {
            return Err(Error::invalid("charge", "must be finite"));
        }
        Ok(())
    }

    /// Diffusivity of the free-particle envelope equation, hbar / 2m.
    pub fn diffusivity(&self) -> f64 {
        self.hbar / (2.0 * self.mass)
    }

    pub fn to_internal(&self, value_si: f64, dim: Dimension) -> f64 {
        value_si / self.scale.factor(dim)
    }

    pub fn to_si(&self, value: f64, dim: Dimension) -> f64 {
        value * self.scale.factor(dim)
    }
}
