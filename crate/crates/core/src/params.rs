//! Parameter sets for the atom-cavity system, the mode geometry and the push beams.
//!
//! All rates are angular frequencies in rad/s. Lengths are in metres.

use serde::{Deserialize, Serialize};

use crate::constants::mhz_to_angular;
use crate::error::{require, Result};

/// Atom-cavity constants. `gamma` is the atomic dipole (half-width) decay
/// rate entering the master equation as gamma (2 s rho s+ - ...), so the
/// excited-state population decays at 2 gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub g0: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Atom-probe detuning omega_a - omega_p.
    pub delta_ap: f64,
    /// Cavity-probe detuning omega_c - omega_p.
    pub delta_cp: f64,
    /// Peak ac Stark shift from the lock field; negative values allowed.
    pub delta_st_max: f64,
    /// Probe drive amplitude.
    pub eta_drive: f64,
}

impl SystemParams {
    /// g0^2 / (2 kappa gamma)
    pub fn cooperativity(&self) -> f64 {
        self.g0 * self.g0 / (2.0 * self.kappa * self.gamma)
    }

    /// gamma^2 / (2 g0^2)
    pub fn critical_photon_number(&self) -> f64 {
        self.gamma * self.gamma / (2.0 * self.g0 * self.g0)
    }

    /// Drive amplitude giving `n_mean` photons in the empty, resonant cavity.
    pub fn drive_for_empty_cavity_photons(&self, n_mean: f64) -> f64 {
        (n_mean * (self.kappa * self.kappa + self.delta_cp * self.delta_cp)).sqrt()
    }

    pub fn with_drive(mut self, eta: f64) -> Self {
        self.eta_drive = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require(self.g0.is_finite() && self.g0 > 0.0, "g0", "must be positive")?;
        require(self.kappa.is_finite() && self.kappa > 0.0, "kappa", "must be positive")?;
        require(self.gamma.is_finite() && self.gamma > 0.0, "gamma", "must be positive")?;
        for (name, v) in [
            ("delta_ap", self.delta_ap),
            ("delta_cp", self.delta_cp),
            ("delta_st_max", self.delta_st_max),
            ("eta_drive", self.eta_drive),
        ] {
            require(v.is_finite(), name, "must be finite")?;
        }
        Ok(())
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        let kappa = mhz_to_angular(18.6);
        SystemParams {
            g0: mhz_to_angular(16.02),
            kappa,
            gamma: mhz_to_angular(3.033),
            delta_ap: 0.0,
            delta_cp: 0.0,
            delta_st_max: mhz_to_angular(-1.0),
            // <n> = 0.06 on resonance for the bare cavity
            eta_drive: kappa * 0.06f64.sqrt(),
        }
    }
}

/// Cavity mode and lock-field geometry. The MOT sits at the origin, gravity
/// points along -z, the cavity axis is x and the mode centre is (0, 0, -d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeGeometry {
    pub w0: f64,
    pub cavity_length: f64,
    pub d: f64,
    pub lambda_lock: f64,
    pub w_lock: f64,
}

impl ModeGeometry {
    pub fn center_z(&self) -> f64 {
        -self.d
    }

    pub fn validate(&self) -> Result<()> {
        require(self.w0.is_finite() && self.w0 > 0.0, "w0", "must be positive")?;
        require(self.d.is_finite() && self.d > 0.0, "d", "must be positive")?;
        require(
            self.cavity_length.is_finite() && self.cavity_length > 0.0,
            "cavity_length",
            "must be positive",
        )?;
        require(self.lambda_lock.is_finite() && self.lambda_lock > 0.0, "lambda_lock", "must be positive")?;
        require(self.w_lock.is_finite() && self.w_lock > 0.0, "w_lock", "must be positive")
    }
}

impl Default for ModeGeometry {
    fn default() -> Self {
        ModeGeometry {
            w0: 26.198e-6,
            cavity_length: 151.686e-6,
            d: 4.80e-3,
            lambda_lock: 788e-9,
            w_lock: 26.198e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PushDirection {
    /// Beam travels downward; force along -z.
    FromAbove,
    /// Beam travels upward; force along +z.
    FromBelow,
}

impl PushDirection {
    /// +1 for a beam from above, -1 from below.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            PushDirection::FromAbove => 1.0,
            PushDirection::FromBelow => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushBeamParams {
    /// Peak saturation parameter I / I_s.
    pub s0: f64,
    /// Atom-push detuning omega_a - omega_ps.
    pub delta_aps: f64,
    pub direction: PushDirection,
    /// 1/e^2 intensity radius.
    pub waist: f64,
    /// Transverse (x, y) offset of the beam axis, which is parallel to z.
    pub axis_offset: [f64; 2],
    pub turn_on_time: f64,
}

impl PushBeamParams {
    /// Downward push used for fast transport. The waist is wide enough that
    /// s is uniform over every atom that reaches the cavity.
    pub fn from_above(s0: f64, delta_aps: f64) -> Self {
        PushBeamParams {
            s0,
            delta_aps,
            direction: PushDirection::FromAbove,
            waist: 10e-3,
            axis_offset: [0.0, 0.0],
            turn_on_time: 0.0,
        }
    }

    /// Upward push through the cavity centre; switched on by the transit trigger.
    pub fn from_below(s0: f64) -> Self {
        PushBeamParams {
            s0,
            delta_aps: 0.0,
            direction: PushDirection::FromBelow,
            waist: 20e-6,
            axis_offset: [0.0, 0.0],
            turn_on_time: f64::INFINITY,
        }
    }

    pub fn off() -> Self {
        PushBeamParams { s0: 0.0, ..Self::from_above(0.0, 0.0) }
    }

    pub fn with_turn_on(mut self, t: f64) -> Self {
        self.turn_on_time = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require(self.s0.is_finite() && self.s0 >= 0.0, "s0", "must be >= 0")?;
        require(self.waist.is_finite() && self.waist > 0.0, "waist", "must be positive")?;
        require(self.delta_aps.is_finite(), "delta_aps", "must be finite")?;
        require(
            self.axis_offset.iter().all(|v| v.is_finite()),
            "axis_offset",
            "must be finite",
        )?;
        require(!self.turn_on_time.is_nan(), "turn_on_time", "must not be NaN")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figures_of_merit_match_quoted_values() {
        let p = SystemParams::default();
        assert!((p.cooperativity() - 2.28).abs() < 0.01, "{}", p.cooperativity());
        assert!(
            (p.critical_photon_number() - 0.01793).abs() < 1e-4,
            "{}",
            p.critical_photon_number()
        );
    }

    #[test]
    fn default_drive_gives_six_percent_photon() {
        let p = SystemParams::default();
        let n = p.eta_drive.powi(2) / p.kappa.powi(2);
        assert!((n - 0.06).abs() < 1e-12);
        assert!((p.drive_for_empty_cavity_photons(0.06) - p.eta_drive).abs() < 1e-6);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = SystemParams::default();
        p.kappa = -1.0;
        assert!(p.validate().is_err());
        let mut g = ModeGeometry::default();
        g.w0 = 0.0;
        assert!(g.validate().is_err());
        let mut b = PushBeamParams::from_above(1e-3, 0.0);
        b.s0 = -0.1;
        assert!(b.validate().is_err());
    }
}
