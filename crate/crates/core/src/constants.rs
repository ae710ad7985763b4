//! Physical constants for the 87Rb D2 cycling transition.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{require, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const AMU: f64 = 1.660_539_066_60e-27;
pub const RB87_MASS: f64 = 86.909_180_527 * AMU;
pub const STANDARD_GRAVITY: f64 = 9.806_65;
pub const RB87_D2_WAVELENGTH: f64 = 780.241_209_686e-9;
/// 1.67 mW/cm^2 expressed in W/m^2.
pub const RB87_D2_SATURATION_INTENSITY: f64 = 16.7;

/// Converts a frequency quoted as nu = omega / 2pi in MHz into rad/s.
#[inline]
pub fn mhz_to_angular(nu_mhz: f64) -> f64 {
    2.0 * PI * nu_mhz * 1e6
}

/// Inverse of [`mhz_to_angular`].
#[inline]
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
    /// Atomic mass in kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    pub lambda_probe: f64,
    /// Wavevector magnitude 2 pi / lambda_probe.
    pub k: f64,
    /// Saturation intensity, W/m^2.
    pub i_sat: f64,
}

impl PhysicalConstants {
    pub fn with_wavelength(mut self, lambda: f64) -> Self {
        self.lambda_probe = lambda;
        self.k = 2.0 * PI / lambda;
        self
    }

    /// Single-photon recoil velocity hbar k / m.
    #[inline]
    pub fn recoil_velocity(&self) -> f64 {
        self.hbar * self.k / self.mass
    }

    /// One-dimensional thermal velocity spread sqrt(kB T / m).
    #[inline]
    pub fn thermal_sigma_v(&self, temperature: f64) -> f64 {
        (self.k_b * temperature / self.mass).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("k_b", self.k_b),
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("lambda_probe", self.lambda_probe),
            ("k", self.k),
            ("i_sat", self.i_sat),
        ] {
            require(v.is_finite() && v > 0.0, name, "must be finite and positive")?;
        }
        require(
            (self.k * self.lambda_probe - 2.0 * PI).abs() < 1e-12,
            "k",
            "k * lambda_probe must equal 2 pi",
        )
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: HBAR,
            k_b: K_B,
            mass: RB87_MASS,
            gravity: STANDARD_GRAVITY,
            lambda_probe: RB87_D2_WAVELENGTH,
            k: 2.0 * PI / RB87_D2_WAVELENGTH,
            i_sat: RB87_D2_SATURATION_INTENSITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavevector_matches_wavelength() {
        let c = PhysicalConstants::default();
        assert!((c.k * c.lambda_probe - 2.0 * PI).abs() < 1e-14);
        c.validate().unwrap();
        let c2 = c.with_wavelength(788e-9);
        assert!((c2.k * c2.lambda_probe - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn thermal_velocity_at_83_microkelvin() {
        let c = PhysicalConstants::default();
        let sv = c.thermal_sigma_v(83e-6);
        let expected = (K_B * 83e-6 / RB87_MASS).sqrt();
        assert_eq!(sv, expected);
        assert!((sv - 0.089).abs() < 0.001, "{sv}");
    }

    #[test]
    fn unit_conversion_round_trips() {
        let w = mhz_to_angular(16.02);
        assert!((angular_to_mhz(w) - 16.02).abs() < 1e-12);
    }
}
