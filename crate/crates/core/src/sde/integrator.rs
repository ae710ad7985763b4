use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::QuantumCoefficientTable;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::fields::{mode_function, saturation_at, stark_shift_at, Vec3};
use crate::params::{ModeGeometry, PushBeamParams, SystemParams};
use crate::quantum::LocalQuantities;
use crate::transport::TrajectoryState;

/// Angular distribution of dipole emission used for recoil diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationTensor(pub Matrix3<f64>);

impl Default for RadiationTensor {
    fn default() -> Self {
        RadiationTensor(Matrix3::from_diagonal(&Vec3::new(0.4, 0.3, 0.3)))
    }
}

impl RadiationTensor {
    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn diagonal(&self) -> Vec3 {
        self.0.diagonal()
    }
}

/// Switches for the individual terms of the momentum equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdeTerms {
    pub dipole: bool,
    pub friction: bool,
    pub dipole_noise: bool,
    pub recoil_noise: bool,
    pub push_force: bool,
    pub gravity: bool,
}

impl Default for SdeTerms {
    fn default() -> Self {
        SdeTerms { dipole: true, friction: true, dipole_noise: true, recoil_noise: true, push_force: true, gravity: true }
    }
}

impl SdeTerms {
    pub fn deterministic() -> Self {
        SdeTerms { dipole_noise: false, recoil_noise: false, ..Self::default() }
    }

    pub fn none() -> Self {
        SdeTerms { dipole: false, friction: false, dipole_noise: false, recoil_noise: false, push_force: false, gravity: false }
    }
}

/// Everything one step needs besides the state.
pub struct StepContext<'a> {
    pub params: &'a SystemParams,
    pub geom: &'a ModeGeometry,
    pub constants: &'a PhysicalConstants,
    pub push: &'a PushBeamParams,
    pub push_off_table: &'a QuantumCoefficientTable,
    pub push_on_table: &'a QuantumCoefficientTable,
    pub tensor: RadiationTensor,
    pub terms: SdeTerms,
    pub dt: f64,
}

impl StepContext<'_> {
    /// Local quantities at the state position; the push-on table is used once
    /// the gate has opened.
    pub fn local(&self, state: &TrajectoryState) -> (LocalQuantities, Vec3, bool) {
        let mode = mode_function(&state.pos, self.geom, self.constants);
        let g = self.params.g0 * mode.psi;
        let st = stark_shift_at(&state.pos, self.geom, self.params);
        let gate = state.t >= self.push.turn_on_time && self.push.s0 > 0.0;
        let q = if gate {
            let s = saturation_at(&state.pos, state.t, self.push);
            self.push_on_table.interpolate(g, st, s)
        } else {
            self.push_off_table.interpolate(g, st, 0.0)
        };
        (q, mode.grad, gate)
    }
}

/// One Euler-Maruyama step of
/// dx = v dt,
/// m dv = -hbar g0 <Phi> grad(psi) dt - (hbar g0^2 / m) chi (p . grad psi) grad psi dt
///        + hbar g0 sqrt(2 xi) grad(psi) dW + hbar k sqrt(<s_e>) sqrt(2 gamma E) dW_vec
///        + (-m g + hbar k gamma <s_e>) z dt.
/// The scattering term acts only while the push gate is open and points
/// along the beam direction.
pub fn sde_step<R: Rng + ?Sized>(state: &TrajectoryState, ctx: &StepContext, rng: &mut R) -> Result<TrajectoryState> {
    let c = ctx.constants;
    let (q, grad, gate) = ctx.local(state);
    let dt = ctx.dt;
    let m = c.mass;
    let hg = c.hbar * ctx.params.g0;
    let g2 = grad.norm_squared();

    let friction_rate = c.hbar * ctx.params.g0 * ctx.params.g0 * q.chi * g2 / m;
    if ctx.terms.friction && (friction_rate * dt).abs() >= 0.1 {
        return Err(Error::StabilityGuard { t: state.t, value: friction_rate * dt });
    }

    let mut dv = Vec3::zeros();
    if ctx.terms.dipole {
        dv -= grad * (hg * q.phi_mean / m * dt);
    }
    if ctx.terms.friction {
        dv -= grad * (c.hbar * ctx.params.g0 * ctx.params.g0 * q.chi * state.vel.dot(&grad) / m * dt);
    }
    if ctx.terms.dipole_noise {
        let w: f64 = rng.sample(StandardNormal);
        dv += grad * (hg * (2.0 * q.xi.max(0.0)).sqrt() / m * w * dt.sqrt());
    }
    if ctx.terms.recoil_noise {
        let amp = c.hbar * c.k * q.sigma_e.max(0.0).sqrt() / m * dt.sqrt();
        let e = ctx.tensor.diagonal();
        for i in 0..3 {
            let w: f64 = rng.sample(StandardNormal);
            dv[i] += amp * (2.0 * ctx.params.gamma * e[i]).sqrt() * w;
        }
    }
    if ctx.terms.gravity {
        dv.z -= c.gravity * dt;
    }
    if ctx.terms.push_force && gate {
        dv.z -= ctx.push.direction.sign() * c.recoil_velocity() * ctx.params.gamma * q.sigma_e * dt;
    }

    let next = TrajectoryState { pos: state.pos + state.vel * dt, vel: state.vel + dv, t: state.t + dt, alive: state.alive };
    if !next.is_finite() {
        return Err(Error::StabilityGuard { t: state.t, value: f64::NAN });
    }
    Ok(next)
}
