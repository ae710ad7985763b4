//! Spatial field maps and the classical scattering-force law.
//!
//! The probe mode is a TEM00 standing wave along the cavity axis (x):
//! psi(r) = cos(k x) exp(-(y^2 + (z + d)^2) / w0^2). The lock field that
//! produces the ac Stark shift is a cos^2 standing wave at its own
//! wavelength, with antinodes registered to the probe antinode at x = 0.

use nalgebra::Vector3;
use std::f64::consts::PI;

use crate::constants::PhysicalConstants;
use crate::params::{ModeGeometry, PushBeamParams, SystemParams};

pub type Vec3 = Vector3<f64>;

/// Mode function value and its gradient (1/m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSample {
    pub psi: f64,
    pub grad: Vec3,
}

pub fn mode_function(pos: &Vec3, geom: &ModeGeometry, constants: &PhysicalConstants) -> ModeSample {
    let k = constants.k;
    let w2 = geom.w0 * geom.w0;
    let dz = pos.z + geom.d;
    let envelope = (-(pos.y * pos.y + dz * dz) / w2).exp();
    let (s, c) = (k * pos.x).sin_cos();
    let psi = c * envelope;
    let grad = Vec3::new(
        -k * s * envelope,
        -2.0 * pos.y / w2 * psi,
        -2.0 * dz / w2 * psi,
    );
    ModeSample { psi, grad }
}

/// g(r) = g0 psi(r)
pub fn coupling_at(
    pos: &Vec3,
    geom: &ModeGeometry,
    params: &SystemParams,
    constants: &PhysicalConstants,
) -> f64 {
    params.g0 * mode_function(pos, geom, constants).psi
}

/// Local ac Stark shift of the atomic transition.
pub fn stark_shift_at(pos: &Vec3, geom: &ModeGeometry, params: &SystemParams) -> f64 {
    let kl = 2.0 * PI / geom.lambda_lock;
    let dz = pos.z + geom.d;
    let c = (kl * pos.x).cos();
    params.delta_st_max * c * c * (-2.0 * (pos.y * pos.y + dz * dz) / (geom.w_lock * geom.w_lock)).exp()
}

/// Local push-beam saturation parameter at time `t`; zero before switch-on.
pub fn saturation_at(pos: &Vec3, t: f64, push: &PushBeamParams) -> f64 {
    if t < push.turn_on_time || push.s0 == 0.0 {
        return 0.0;
    }
    let dx = pos.x - push.axis_offset[0];
    let dy = pos.y - push.axis_offset[1];
    push.s0 * (-2.0 * (dx * dx + dy * dy) / (push.waist * push.waist)).exp()
}

/// Photon scattering rate gamma s / (1 + s + ((Delta_aps - dir k v_z)/gamma)^2).
pub fn scattering_rate(
    vz: f64,
    s_local: f64,
    push: &PushBeamParams,
    gamma: f64,
    constants: &PhysicalConstants,
) -> f64 {
    if s_local == 0.0 {
        return 0.0;
    }
    let detuning = (push.delta_aps - push.direction.sign() * constants.k * vz) / gamma;
    gamma * s_local / (1.0 + s_local + detuning * detuning)
}

/// dv_z/dt under gravity and the push beam.
pub fn scattering_accel(
    vz: f64,
    s_local: f64,
    push: &PushBeamParams,
    gamma: f64,
    constants: &PhysicalConstants,
) -> f64 {
    if s_local == 0.0 {
        return -constants.gravity;
    }
    let optical = constants.recoil_velocity() * scattering_rate(vz, s_local, push, gamma, constants);
    -constants.gravity - push.direction.sign() * optical
}

/// Push-beam Rabi frequency for a saturation parameter, Omega = gamma sqrt(2 s),
/// with gamma the dipole half-width.
#[inline]
pub fn rabi_from_saturation(s: f64, gamma: f64) -> f64 {
    gamma * (2.0 * s.max(0.0)).sqrt()
}
