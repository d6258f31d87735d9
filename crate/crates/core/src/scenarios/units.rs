//! Conversion between SI inputs and natural units.
//!
//! A reference angular frequency `w` (s^-1) and length `L` (m) fix the
//! natural scales: energies in `hbar w`, times in `1/w`, masses in
//! `hbar / (L^2 w)`. Every SI rate or frequency is read as angular.

use serde::Serialize;

use crate::error::{Error, Result};

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnitSystem {
    /// Reference angular frequency in s^-1.
    pub frequency: f64,
    /// Reference length in m.
    pub length: f64,
}

impl UnitSystem {
    pub fn new(frequency: f64, length: f64) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::param("frequency_unit", "must be finite and > 0"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("length_unit", "must be finite and > 0"));
        }
        Ok(Self { frequency, length })
    }

    pub fn rate_to_natural(&self, per_second: f64) -> f64 {
        per_second / self.frequency
    }

    pub fn rate_to_si(&self, natural: f64) -> f64 {
        natural * self.frequency
    }

    pub fn time_to_natural(&self, seconds: f64) -> f64 {
        seconds * self.frequency
    }

    pub fn time_to_si(&self, natural: f64) -> f64 {
        natural / self.frequency
    }

    pub fn mass_unit(&self) -> f64 {
        HBAR / (self.length * self.length * self.frequency)
    }

    pub fn mass_to_natural(&self, kg: f64) -> f64 {
        kg / self.mass_unit()
    }

    pub fn mass_to_si(&self, natural: f64) -> f64 {
        natural * self.mass_unit()
    }

    /// Force unit `hbar w / L` in N.
    pub fn force_unit(&self) -> f64 {
        HBAR * self.frequency / self.length
    }

    /// Force-gradient unit `hbar w / L^2` in N/m.
    pub fn gradient_unit(&self) -> f64 {
        self.force_unit() / self.length
    }

    pub fn energy_unit(&self) -> f64 {
        HBAR * self.frequency
    }
}
