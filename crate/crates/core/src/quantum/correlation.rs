//! Two-time correlation integrals of Phi = a+ s_ge + s_eg a via the quantum
//! regression theorem.
//!
//! With Y = Phi rho + rho Phi - 2 <Phi> rho and W = Phi rho - rho Phi (both
//! trace-free), and L~ the Liouvillian on the trace-free subspace:
//!
//!   xi  = 1/2 Tr[Phi int_0^inf e^{L tau} Y dtau]       = -1/2 Tr[Phi L~^-1 Y]
//!   chi = i Tr[Phi int_0^inf tau e^{L tau} W dtau]     =  i Tr[Phi L~^-2 W]

use super::liouvillian::build_liouvillian;
use super::operators::{build_interaction_hamiltonian, HilbertConfig, LocalCouplings};
use super::steady::SteadyState;
use super::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationIntegrals {
    pub phi_mean: f64,
    /// seconds
    pub xi: f64,
    /// seconds^2
    pub chi: f64,
    /// |Im xi| / max(|xi|, tiny); should vanish.
    pub xi_imag_residue: f64,
    pub chi_imag_residue: f64,
}

/// Trace-free operators whose regression integrals give xi and chi.
pub(crate) fn regression_sources(rho: &CMatrix, phi: &CMatrix) -> (C64, CMatrix, CMatrix) {
    let phi_mean = (phi * rho).trace();
    let phi_rho = phi * rho;
    let rho_phi = rho * phi;
    let y = &phi_rho + &rho_phi - rho * (phi_mean * C64::new(2.0, 0.0));
    let w = &phi_rho - &rho_phi;
    (phi_mean, y, w)
}

fn relative_imag(z: C64) -> f64 {
    if z.norm() == 0.0 {
        0.0
    } else {
        z.im.abs() / z.norm()
    }
}

pub(crate) fn correlation_integrals_with(ss: &SteadyState, cfg: &HilbertConfig) -> Result<CorrelationIntegrals> {
    let phi = cfg.phi().0;
    let (phi_mean, y, w) = regression_sources(&ss.rho.matrix, &phi);

    let z1 = ss.solve_traceless(&y)?;
    let xi = (&phi * z1).trace() * C64::new(-0.5, 0.0);

    let w1 = ss.solve_traceless(&w)?;
    let w2 = ss.solve_traceless(&w1)?;
    let chi = (&phi * w2).trace() * C64::new(0.0, 1.0);

    if !(xi.re.is_finite() && chi.re.is_finite()) {
        return Err(Error::SingularResolvent);
    }
    Ok(CorrelationIntegrals {
        phi_mean: phi_mean.re,
        xi: xi.re,
        chi: chi.re,
        xi_imag_residue: relative_imag(xi),
        chi_imag_residue: relative_imag(chi),
    })
}

pub fn correlation_integrals(
    params: &SystemParams,
    local: &LocalCouplings,
    cfg: &HilbertConfig,
) -> Result<CorrelationIntegrals> {
    let h = build_interaction_hamiltonian(params, local, cfg)?;
    let l = build_liouvillian(&h, params, cfg)?;
    let ss = SteadyState::solve(&l)?;
    correlation_integrals_with(&ss, cfg)
}
