use super::operators::{HilbertConfig, OperatorMatrix};
use super::{CMatrix, CVector, C64};
use crate::error::{require, Result};
use crate::params::SystemParams;

/// Superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub matrix: CMatrix,
    dim: usize,
}

impl Liouvillian {
    /// Hilbert-space dimension (the superoperator is dim^2 x dim^2).
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = CVector::from_column_slice(rho.as_slice());
        let out = &self.matrix * v;
        CMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }
}

fn spre(a: &CMatrix) -> CMatrix {
    CMatrix::identity(a.nrows(), a.nrows()).kronecker(a)
}

fn spost(b: &CMatrix) -> CMatrix {
    b.transpose().kronecker(&CMatrix::identity(b.nrows(), b.nrows()))
}

/// rate * (2 C rho C+ - C+C rho - rho C+C)
fn dissipator(c: &CMatrix, rate: f64) -> CMatrix {
    let cdc = c.adjoint() * c;
    let jump = c.conjugate().kronecker(c) * C64::new(2.0, 0.0);
    (jump - spre(&cdc) - spost(&cdc)) * C64::new(rate, 0.0)
}

/// L[rho] = -i[H, rho] + gamma D[s_ge] rho + kappa D[a] rho, with `h` = H/hbar.
pub fn build_liouvillian(
    h: &OperatorMatrix,
    params: &SystemParams,
    cfg: &HilbertConfig,
) -> Result<Liouvillian> {
    h.check_dim(cfg)?;
    require(params.gamma >= 0.0, "gamma", "must be non-negative")?;
    require(params.kappa >= 0.0, "kappa", "must be non-negative")?;
    let minus_i = C64::new(0.0, -1.0);
    let mut l = (spre(&h.0) - spost(&h.0)) * minus_i;
    if params.gamma != 0.0 {
        l += dissipator(&cfg.sigma_ge().0, params.gamma);
    }
    if params.kappa != 0.0 {
        l += dissipator(&cfg.annihilation().0, params.kappa);
    }
    Ok(Liouvillian { matrix: l, dim: cfg.dim() })
}
