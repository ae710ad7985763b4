//! Classical Monte Carlo transport from the MOT to the cavity plane.
//!
//! Each atom starts at the source with a Maxwell-Boltzmann velocity and is
//! stepped with explicit Euler at a fixed `dt`. Gravity and the scattering
//! force of the push beam act along z; spontaneous-emission recoils from
//! Poisson-distributed scattering events kick the transverse velocity.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{require, Result};
use crate::fields::{saturation_at, scattering_accel, scattering_rate, Vec3};
use crate::params::{ModeGeometry, PushBeamParams};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    /// Cloud temperature at release, K.
    pub temperature: f64,
    pub release_time: f64,
    pub source_position: [f64; 3],
    /// Gaussian rms cloud size per axis; zero is a point source.
    pub source_sigma: [f64; 3],
    pub dt: f64,
    pub rng_seed: u64,
    /// Transverse recoil kicks from scattered photons.
    pub recoil: bool,
    /// Trajectories still above the plane after this time are dropped.
    pub max_time: f64,
    pub bin_time: f64,
    /// Maximum |y| at the crossing for a cavity transit; `None` counts every crossing.
    pub acceptance_half_width: Option<f64>,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.n_atoms >= 1, "n_atoms", "must be at least 1")?;
        require(self.temperature.is_finite() && self.temperature > 0.0, "temperature", "must be positive")?;
        require(self.dt.is_finite() && self.dt > 0.0, "dt", "must be positive")?;
        require(self.bin_time.is_finite() && self.bin_time > 0.0, "bin_time", "must be positive")?;
        require(self.max_time > self.release_time, "max_time", "must exceed release_time")?;
        require(
            self.source_sigma.iter().all(|s| s.is_finite() && *s >= 0.0),
            "source_sigma",
            "must be non-negative",
        )?;
        if let Some(a) = self.acceptance_half_width {
            require(a > 0.0, "acceptance_half_width", "must be positive")?;
        }
        Ok(())
    }
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_atoms: 10_000,
            temperature: 83e-6,
            release_time: 0.0,
            source_position: [0.0; 3],
            source_sigma: [0.0; 3],
            dt: 1e-6,
            rng_seed: 1,
            recoil: true,
            max_time: 0.1,
            bin_time: 500e-6,
            acceptance_half_width: Some(2.0 * ModeGeometry::default().w0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub t: f64,
    pub alive: bool,
}

impl TrajectoryState {
    pub fn new(pos: Vec3, vel: Vec3, t: f64) -> Self {
        TrajectoryState { pos, vel, t, alive: true }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalEvent {
    pub t_arr: f64,
    /// (x, y) at the crossing.
    pub transverse_offset: [f64; 2],
    pub v_at_crossing: f64,
    pub trajectory_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalHistogram {
    pub start: f64,
    pub bin_time: f64,
    pub counts: Vec<u64>,
}

impl ArrivalHistogram {
    pub fn from_times(times: impl IntoIterator<Item = f64>, start: f64, end: f64, bin_time: f64) -> Self {
        let n = ((end - start) / bin_time).ceil().max(1.0) as usize;
        let mut counts = vec![0u64; n];
        for t in times {
            let i = ((t - start) / bin_time).floor();
            if i >= 0.0 && (i as usize) < n {
                counts[i as usize] += 1;
            }
        }
        ArrivalHistogram { start, bin_time, counts }
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.start + (i as f64 + 0.5) * self.bin_time
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    /// Accepted cavity transits, sorted by trajectory id.
    pub events: Vec<ArrivalEvent>,
    pub histogram: ArrivalHistogram,
    pub mean_arrival: Option<f64>,
    pub std_arrival: Option<f64>,
    pub n_launched: usize,
    /// Plane crossings regardless of transverse offset.
    pub n_crossed: usize,
}

/// Initial state of trajectory `id`, drawn from its own random stream.
pub fn sample_initial_state<R: Rng + ?Sized>(
    cfg: &EnsembleConfig,
    constants: &PhysicalConstants,
    rng: &mut R,
) -> TrajectoryState {
    let sv = constants.thermal_sigma_v(cfg.temperature);
    let mut vel = Vec3::zeros();
    for v in vel.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sv * z;
    }
    let mut pos = Vec3::from(cfg.source_position);
    for (p, s) in pos.iter_mut().zip(cfg.source_sigma) {
        if s > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            *p += s * z;
        }
    }
    TrajectoryState::new(pos, vel, cfg.release_time)
}

pub fn sample_maxwell_boltzmann(cfg: &EnsembleConfig, constants: &PhysicalConstants) -> Vec<TrajectoryState> {
    (0..cfg.n_atoms as u64)
        .map(|id| sample_initial_state(cfg, constants, &mut rng::stream(cfg.rng_seed, id)))
        .collect()
}

/// Poisson draw, by inversion for the small means that dominate a 1 us step.
fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > 10.0 {
        return Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0);
    }
    let mut u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut k = 0u64;
    while u > p {
        u -= p;
        k += 1;
        p *= mean / k as f64;
        if k > 100 {
            break;
        }
    }
    k
}

/// Uniform direction on the unit sphere.
pub fn isotropic_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let cos_theta: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    Vec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta)
}

/// One explicit Euler step.
pub fn step_trajectory<R: Rng + ?Sized>(
    state: &TrajectoryState,
    push: &PushBeamParams,
    cfg: &EnsembleConfig,
    gamma: f64,
    constants: &PhysicalConstants,
    rng: &mut R,
) -> TrajectoryState {
    let dt = cfg.dt;
    let s_local = saturation_at(&state.pos, state.t, push);
    let mut vel = state.vel;
    vel.z += scattering_accel(state.vel.z, s_local, push, gamma, constants) * dt;
    if cfg.recoil && s_local > 0.0 {
        let expected = scattering_rate(state.vel.z, s_local, push, gamma, constants) * dt;
        let n = poisson_count(expected, rng);
        let vr = constants.recoil_velocity();
        for _ in 0..n {
            let u = isotropic_direction(rng);
            vel.x += vr * u.x;
            vel.y += vr * u.y;
        }
    }
    TrajectoryState {
        pos: state.pos + state.vel * dt,
        vel,
        t: state.t + dt,
        alive: state.alive,
    }
}

/// Event iff the trajectory crosses z = -d between the two states; the
/// crossing time and offsets are linearly interpolated.
pub fn detect_arrival(
    before: &TrajectoryState,
    after: &TrajectoryState,
    geom: &ModeGeometry,
    trajectory_id: u64,
) -> Option<ArrivalEvent> {
    let plane = -geom.d;
    let (zb, za) = (before.pos.z, after.pos.z);
    let crossed = (zb > plane && za <= plane) || (zb < plane && za >= plane);
    if !crossed {
        return None;
    }
    let f = (zb - plane) / (zb - za);
    let lerp = |a: f64, b: f64| a + f * (b - a);
    Some(ArrivalEvent {
        t_arr: lerp(before.t, after.t),
        transverse_offset: [lerp(before.pos.x, after.pos.x), lerp(before.pos.y, after.pos.y)],
        v_at_crossing: lerp(before.vel.z, after.vel.z),
        trajectory_id,
    })
}

/// Steps one atom until its first crossing of the cavity plane.
pub fn propagate_to_plane(
    id: u64,
    cfg: &EnsembleConfig,
    push: &PushBeamParams,
    geom: &ModeGeometry,
    gamma: f64,
    constants: &PhysicalConstants,
) -> Option<ArrivalEvent> {
    let mut rng = rng::stream(cfg.rng_seed, id);
    let mut state = sample_initial_state(cfg, constants, &mut rng);
    while state.t < cfg.max_time {
        let next = step_trajectory(&state, push, cfg, gamma, constants, &mut rng);
        if let Some(ev) = detect_arrival(&state, &next, geom, id) {
            return Some(ev);
        }
        state = next;
    }
    None
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Runs the ensemble in parallel; results are independent of thread count.
pub fn run_transport(
    cfg: &EnsembleConfig,
    push: &PushBeamParams,
    geom: &ModeGeometry,
    gamma: f64,
    constants: &PhysicalConstants,
) -> Result<TransportResult> {
    cfg.validate()?;
    push.validate()?;
    geom.validate()?;
    let crossings: Vec<ArrivalEvent> = (0..cfg.n_atoms as u64)
        .into_par_iter()
        .filter_map(|id| propagate_to_plane(id, cfg, push, geom, gamma, constants))
        .collect();
    let n_crossed = crossings.len();
    let events: Vec<ArrivalEvent> = crossings
        .into_iter()
        .filter(|ev| cfg.acceptance_half_width.is_none_or(|a| ev.transverse_offset[1].abs() <= a))
        .collect();
    let times: Vec<f64> = events.iter().map(|e| e.t_arr).collect();
    let histogram = ArrivalHistogram::from_times(times.iter().copied(), cfg.release_time, cfg.max_time, cfg.bin_time);
    let stats = mean_std(&times);
    Ok(TransportResult {
        events,
        histogram,
        mean_arrival: stats.map(|s| s.0),
        std_arrival: stats.map(|s| s.1),
        n_launched: cfg.n_atoms,
        n_crossed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn gamma() -> f64 {
        SystemParams::default().gamma
    }

    #[test]
    fn thermal_velocity_statistics() {
        let cfg = EnsembleConfig { n_atoms: 20_000, ..EnsembleConfig::default() };
        let c = consts();
        let states = sample_maxwell_boltzmann(&cfg, &c);
        let sv = c.thermal_sigma_v(cfg.temperature);
        assert!((sv - 0.089).abs() < 5e-4);
        let n = states.len() as f64;
        for axis in 0..3 {
            let mean = states.iter().map(|s| s.vel[axis]).sum::<f64>() / n;
            assert!(mean.abs() < 5.0 * sv / n.sqrt());
        }
        let v2 = states.iter().map(|s| s.vel.norm_squared()).sum::<f64>() / n;
        let expected = 3.0 * c.k_b * cfg.temperature / c.mass;
        // var(v^2) = 6 sigma^4 for three Gaussian axes
        let se = (6.0f64).sqrt() * sv * sv / n.sqrt();
        assert!((v2 - expected).abs() < 5.0 * se);
        assert!(states.iter().all(|s| s.pos == Vec3::zeros()));
    }

    #[test]
    fn one_step_from_rest_without_push() {
        let cfg = EnsembleConfig::default();
        let c = consts();
        let s = TrajectoryState::new(Vec3::zeros(), Vec3::zeros(), 0.0);
        let mut r = rng::stream(1, 0);
        let n = step_trajectory(&s, &PushBeamParams::off(), &cfg, gamma(), &c, &mut r);
        assert_eq!(n.vel.z, -c.gravity * cfg.dt);
        assert_eq!(n.pos, Vec3::zeros());
    }

    #[test]
    fn free_fall_arrival_time() {
        let geom = ModeGeometry::default();
        let c = consts();
        let cfg = EnsembleConfig { recoil: false, ..EnsembleConfig::default() };
        let mut state = TrajectoryState::new(Vec3::zeros(), Vec3::zeros(), 0.0);
        let mut r = rng::stream(1, 0);
        let mut ev = None;
        while ev.is_none() && state.t < 0.1 {
            let next = step_trajectory(&state, &PushBeamParams::off(), &cfg, gamma(), &c, &mut r);
            ev = detect_arrival(&state, &next, &geom, 0);
            state = next;
        }
        let t = ev.unwrap().t_arr;
        let exact = (2.0 * geom.d / c.gravity).sqrt();
        assert!((exact - 0.0313).abs() < 1e-4);
        // explicit Euler lags by about dt/2
        assert!((t - exact).abs() < 2.0 * cfg.dt, "{t} {exact}");
    }

    #[test]
    fn no_event_without_crossing() {
        let geom = ModeGeometry::default();
        let a = TrajectoryState::new(Vec3::new(0.0, 0.0, -1e-3), Vec3::zeros(), 0.0);
        let b = TrajectoryState::new(Vec3::new(0.0, 0.0, -2e-3), Vec3::zeros(), 1e-6);
        assert!(detect_arrival(&a, &b, &geom, 0).is_none());
    }

    #[test]
    fn crossing_on_step_boundary() {
        let geom = ModeGeometry::default();
        let a = TrajectoryState::new(Vec3::new(0.0, 0.0, -geom.d + 1e-7), Vec3::zeros(), 1.0e-3);
        let b = TrajectoryState::new(Vec3::new(1e-6, 2e-6, -geom.d), Vec3::zeros(), 1.001e-3);
        let ev = detect_arrival(&a, &b, &geom, 9).unwrap();
        assert_eq!(ev.t_arr, 1.001e-3);
        assert_eq!(ev.transverse_offset, [1e-6, 2e-6]);
        assert_eq!(ev.trajectory_id, 9);
    }

    /// High-accuracy RK4 with a 10 ns step on dv/dt = -g - a_opt(v).
    fn ode_velocity(t_end: f64, s: f64, push: &PushBeamParams) -> f64 {
        let c = consts();
        let h = 1e-8;
        let f = |v: f64| scattering_accel(v, s, push, gamma(), &c);
        let mut v = 0.0;
        let steps = (t_end / h).round() as usize;
        for _ in 0..steps {
            let k1 = f(v);
            let k2 = f(v + 0.5 * h * k1);
            let k3 = f(v + 0.5 * h * k2);
            let k4 = f(v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        v
    }

    #[test]
    fn deterministic_push_matches_ode() {
        let c = consts();
        let s = 1e-3;
        let push = PushBeamParams::from_above(s, 0.0);
        let cfg = EnsembleConfig { recoil: false, ..EnsembleConfig::default() };
        let mut state = TrajectoryState::new(Vec3::zeros(), Vec3::zeros(), 0.0);
        let mut r = rng::stream(1, 0);
        let t_end = 0.01;
        for _ in 0..(t_end / cfg.dt).round() as usize {
            state = step_trajectory(&state, &push, &cfg, gamma(), &c, &mut r);
        }
        let oracle = ode_velocity(t_end, s, &push);
        assert!((state.vel.z / oracle - 1.0).abs() < 1e-3, "{} {}", state.vel.z, oracle);
    }

    #[test]
    fn recoil_random_walk_variance() {
        let c = consts();
        let push = PushBeamParams::from_above(1.0, 0.0);
        let cfg = EnsembleConfig::default();
        let n_traj = 4000;
        let steps = 20;
        let mut vx2 = 0.0;
        let mut scattered = 0.0;
        for id in 0..n_traj {
            let mut r = rng::stream(42, id);
            let mut state = TrajectoryState::new(Vec3::zeros(), Vec3::zeros(), 0.0);
            for _ in 0..steps {
                // hold v_z fixed so the rate is constant
                let rate = scattering_rate(0.0, 1.0, &push, gamma(), &c);
                scattered += rate * cfg.dt;
                state = step_trajectory(&state, &push, &cfg, gamma(), &c, &mut r);
                state.vel.z = 0.0;
            }
            vx2 += state.vel.x * state.vel.x;
        }
        let var = vx2 / n_traj as f64;
        let n_mean = scattered / n_traj as f64;
        let oracle = n_mean * c.recoil_velocity().powi(2) * (2.0 / 3.0) * 0.5;
        assert!((var / oracle - 1.0).abs() < 0.08, "{var} vs {oracle}");
    }

    #[test]
    fn energy_conserved_in_free_fall_to_first_order() {
        let c = consts();
        let energy_drift = |dt: f64| {
            let cfg = EnsembleConfig { dt, recoil: false, ..EnsembleConfig::default() };
            let mut state = TrajectoryState::new(Vec3::zeros(), Vec3::new(0.05, -0.03, 0.1), 0.0);
            let e0 = 0.5 * state.vel.norm_squared() + c.gravity * state.pos.z;
            let mut r = rng::stream(1, 0);
            while state.t < 0.02 {
                state = step_trajectory(&state, &PushBeamParams::off(), &cfg, gamma(), &c, &mut r);
            }
            let e1 = 0.5 * state.vel.norm_squared() + c.gravity * state.pos.z;
            (e1 - e0).abs()
        };
        let coarse = energy_drift(1e-5);
        let fine = energy_drift(1e-6);
        let ratio = coarse / fine;
        assert!((ratio - 10.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let geom = ModeGeometry::default();
        let cfg = EnsembleConfig { n_atoms: 300, acceptance_half_width: None, ..EnsembleConfig::default() };
        let push = PushBeamParams::from_above(1e-3, 0.0);
        let a = run_transport(&cfg, &push, &geom, gamma(), &consts()).unwrap();
        let b = run_transport(&cfg, &push, &geom, gamma(), &consts()).unwrap();
        assert_eq!(a.events, b.events);
        assert!(a.events.windows(2).all(|w| w[0].trajectory_id < w[1].trajectory_id));
    }

    #[test]
    fn empty_result_is_not_an_error() {
        let geom = ModeGeometry::default();
        let cfg = EnsembleConfig { n_atoms: 5, max_time: 1e-3, ..EnsembleConfig::default() };
        let r = run_transport(&cfg, &PushBeamParams::off(), &geom, gamma(), &consts()).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.histogram.total(), 0);
        assert!(r.mean_arrival.is_none());
    }
}
