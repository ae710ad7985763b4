//! Simulation and analysis toolkit for single atoms transported into a
//! high-finesse optical cavity by gravity and optical push beams.
//!
//! * [`fields`]: mode function, ac Stark map, push-beam profile and scattering force.
//! * [`quantum`]: Jaynes-Cummings master equation, steady states, spectra and
//!   the regression integrals used for the semiclassical force.
//! * [`transport`]: Monte Carlo transport from the MOT to the cavity plane.
//! * [`sde`]: Ito stochastic trajectories inside the cavity mode.
//! * [`stats`]: photon-count thresholding, dip detection, Poisson
//!   reconstruction, arrival-time fitting and g2.

pub mod constants;
pub mod error;
pub mod fields;
pub mod numeric;
pub mod params;
pub mod quantum;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod transport;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use fields::Vec3;
pub use params::{ModeGeometry, PushBeamParams, PushDirection, SystemParams};
