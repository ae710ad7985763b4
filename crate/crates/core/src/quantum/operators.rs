use nalgebra::DMatrix;

use super::{CMatrix, C64};
use crate::error::{require, Error, Result};
use crate::params::SystemParams;

/// Truncated Hilbert space: two atomic levels times Fock states 0..=fock_cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertConfig {
    pub fock_cutoff: usize,
}

impl HilbertConfig {
    pub const ATOM_LEVELS: usize = 2;

    pub fn new(fock_cutoff: usize) -> Result<Self> {
        require(fock_cutoff >= 2, "fock_cutoff", "must be at least 2")?;
        Ok(HilbertConfig { fock_cutoff })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        Self::ATOM_LEVELS * self.fock_dim()
    }

    #[inline]
    pub fn index(&self, excited: bool, n: usize) -> usize {
        (excited as usize) * self.fock_dim() + n
    }

    /// Photon annihilation operator a.
    pub fn annihilation(&self) -> OperatorMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for atom in [false, true] {
            for n in 1..self.fock_dim() {
                m[(self.index(atom, n - 1), self.index(atom, n))] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
        OperatorMatrix(m)
    }

    /// Atomic lowering operator |g><e|.
    pub fn sigma_ge(&self) -> OperatorMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for n in 0..self.fock_dim() {
            m[(self.index(false, n), self.index(true, n))] = C64::new(1.0, 0.0);
        }
        OperatorMatrix(m)
    }

    /// Excited-state projector |e><e|.
    pub fn sigma_e(&self) -> OperatorMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for n in 0..self.fock_dim() {
            let i = self.index(true, n);
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        OperatorMatrix(m)
    }

    pub fn number(&self) -> OperatorMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for atom in [false, true] {
            for n in 0..self.fock_dim() {
                let i = self.index(atom, n);
                m[(i, i)] = C64::new(n as f64, 0.0);
            }
        }
        OperatorMatrix(m)
    }

    /// Phi = a+ s_ge + s_eg a.
    pub fn phi(&self) -> OperatorMatrix {
        let a = self.annihilation();
        let s = self.sigma_ge();
        let t = a.adjoint().0 * &s.0;
        OperatorMatrix(&t + t.adjoint())
    }
}

impl Default for HilbertConfig {
    fn default() -> Self {
        HilbertConfig { fock_cutoff: 6 }
    }
}

/// Dense square operator on the joint atom-field space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(pub CMatrix);

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix(self.0.adjoint())
    }

    pub fn check_dim(&self, cfg: &HilbertConfig) -> Result<()> {
        if self.0.nrows() != cfg.dim() || self.0.ncols() != cfg.dim() {
            return Err(Error::DimensionMismatch { expected: cfg.dim(), actual: self.0.nrows() });
        }
        Ok(())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(OperatorMatrix(&self.0 + &other.0))
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(OperatorMatrix(&self.0 * &other.0))
    }

    fn scaled(&self, f: f64) -> CMatrix {
        self.0.map(|z| z * f)
    }
}

/// Position-dependent couplings felt by the atom at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalCouplings {
    pub g_local: f64,
    pub stark_local: f64,
    /// Push-beam Rabi frequency, 0 when the push beam is off.
    pub omega_ps: f64,
}

impl LocalCouplings {
    pub fn new(g_local: f64, stark_local: f64, omega_ps: f64) -> Self {
        LocalCouplings { g_local, stark_local, omega_ps }
    }
}

/// H/hbar = (D_ap + D_st) s_e + D_cp a+a + g (a+ s_ge + h.c.) + eta (a+ + a)
///          + (Omega_ps / 2)(s_ge + s_eg)
pub fn build_interaction_hamiltonian(
    params: &SystemParams,
    local: &LocalCouplings,
    cfg: &HilbertConfig,
) -> Result<OperatorMatrix> {
    require(cfg.fock_cutoff >= 2, "fock_cutoff", "must be at least 2")?;
    let a = cfg.annihilation();
    let sge = cfg.sigma_ge();
    let mut h: CMatrix = DMatrix::zeros(cfg.dim(), cfg.dim());
    h += cfg.sigma_e().scaled(params.delta_ap + local.stark_local);
    h += cfg.number().scaled(params.delta_cp);
    if local.g_local != 0.0 {
        h += cfg.phi().scaled(local.g_local);
    }
    if params.eta_drive != 0.0 {
        let x = &a.0 + a.0.adjoint();
        h += x.map(|z| z * params.eta_drive);
    }
    if local.omega_ps != 0.0 {
        let x = &sge.0 + sge.0.adjoint();
        h += x.map(|z| z * (0.5 * local.omega_ps));
    }
    Ok(OperatorMatrix(h))
}
