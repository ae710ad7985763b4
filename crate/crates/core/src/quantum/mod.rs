//! Driven Jaynes-Cummings model with cavity and atomic damping.
//!
//! Hamiltonians are stored divided by hbar, i.e. in rad/s. The joint basis
//! is |atom> (x) |n> with index `atom * (N + 1) + n`, atom 0 = |g>, 1 = |e>.
//! Density matrices are vectorised column-major (column stacking), so
//! vec(A rho B) = (B^T (x) A) vec(rho).

mod correlation;
mod liouvillian;
mod operators;
mod spectrum;
mod steady;

pub use correlation::{correlation_integrals, CorrelationIntegrals};
pub use liouvillian::{build_liouvillian, Liouvillian};
pub use operators::{build_interaction_hamiltonian, HilbertConfig, LocalCouplings, OperatorMatrix};
pub use spectrum::{local_maxima, transmission_spectrum, SpectrumPoint};
pub use steady::{
    excited_population, mean_photon_number, steady_state, DensityMatrix, SteadyState,
};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;

use crate::error::Result;
use crate::params::SystemParams;

/// Everything the trajectory engine needs from one local steady state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalQuantities {
    /// <a+ s_ge + s_eg a>
    pub phi_mean: f64,
    /// Dipole-force diffusion integral, seconds.
    pub xi: f64,
    /// Friction integral, seconds^2.
    pub chi: f64,
    pub sigma_e: f64,
    pub n_mean: f64,
}

/// Solves the steady state at one set of local couplings and evaluates all
/// quantities the semiclassical force law uses.
pub fn local_quantities(
    params: &SystemParams,
    local: &LocalCouplings,
    cfg: &HilbertConfig,
) -> Result<LocalQuantities> {
    let h = build_interaction_hamiltonian(params, local, cfg)?;
    let l = build_liouvillian(&h, params, cfg)?;
    let ss = SteadyState::solve(&l)?;
    let corr = correlation::correlation_integrals_with(&ss, cfg)?;
    Ok(LocalQuantities {
        phi_mean: corr.phi_mean,
        xi: corr.xi,
        chi: corr.chi,
        sigma_e: excited_population(&ss.rho, cfg),
        n_mean: mean_photon_number(&ss.rho, cfg),
    })
}
