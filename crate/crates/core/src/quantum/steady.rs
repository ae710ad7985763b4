use nalgebra::linalg::LU;
use nalgebra::{Dyn, SymmetricEigen};

use super::liouvillian::Liouvillian;
use super::operators::HilbertConfig;
use super::{CMatrix, CVector, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: CMatrix,
}

impl DensityMatrix {
    pub const TOLERANCE: f64 = 1e-10;
    pub const EIGEN_FLOOR: f64 = -1e-8;

    pub fn pure(cfg: &HilbertConfig, excited: bool, n: usize) -> Self {
        let mut m = CMatrix::zeros(cfg.dim(), cfg.dim());
        let i = cfg.index(excited, n);
        m[(i, i)] = C64::new(1.0, 0.0);
        DensityMatrix { matrix: m }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    pub fn expect(&self, op: &CMatrix) -> C64 {
        (op * &self.matrix).trace()
    }

    /// Hermitian within 1e-10, unit trace within 1e-10, eigenvalues >= -1e-8.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > Self::TOLERANCE {
            return Err(Error::Domain(format!("density matrix not Hermitian (defect {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > Self::TOLERANCE {
            return Err(Error::Domain(format!("density matrix trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < Self::EIGEN_FLOOR {
            return Err(Error::Domain(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

/// Steady state together with the factorised bordered Liouvillian, which is
/// reused for resolvent solves on the trace-free subspace.
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub liouvillian: Liouvillian,
    bordered: LU<C64, Dyn, Dyn>,
}

impl SteadyState {
    /// Replaces the first row of L by the trace functional and solves
    /// L' vec(rho) = e_0.
    pub fn solve(l: &Liouvillian) -> Result<SteadyState> {
        let d = l.hilbert_dim();
        let n = d * d;
        let mut m = l.matrix.clone();
        for j in 0..n {
            m[(0, j)] = C64::new(0.0, 0.0);
        }
        for i in 0..d {
            m[(0, i * d + i)] = C64::new(1.0, 0.0);
        }
        let lu = m.lu();
        check_pivots(&lu)?;
        let mut rhs = CVector::zeros(n);
        rhs[0] = C64::new(1.0, 0.0);
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::NonUniqueSteadyState("bordered Liouvillian is singular".into()))?;
        let raw = CMatrix::from_column_slice(d, d, x.as_slice());
        let mut rho = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
        let tr = rho.trace();
        rho /= tr;

        let residual = l.apply(&rho).norm();
        let scale = l.norm();
        if residual > 1e-10 * scale {
            return Err(Error::NonUniqueSteadyState(format!(
                "residual {residual:.3e} exceeds 1e-10 * |L| = {:.3e}",
                1e-10 * scale
            )));
        }
        Ok(SteadyState { rho: DensityMatrix { matrix: rho }, liouvillian: l.clone(), bordered: lu })
    }

    /// Solves L z = y for trace-free `y`, returning the trace-free solution.
    pub fn solve_traceless(&self, y: &CMatrix) -> Result<CMatrix> {
        let d = self.liouvillian.hilbert_dim();
        let mut rhs = CVector::from_column_slice(y.as_slice());
        rhs[0] = C64::new(0.0, 0.0);
        let z = self.bordered.solve(&rhs).ok_or(Error::SingularResolvent)?;
        Ok(CMatrix::from_column_slice(d, d, z.as_slice()))
    }

    pub fn residual(&self) -> f64 {
        self.liouvillian.apply(&self.rho.matrix).norm()
    }
}

fn check_pivots(lu: &LU<C64, Dyn, Dyn>) -> Result<()> {
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(Error::NonUniqueSteadyState(format!(
            "pivot ratio {:.3e} indicates a degenerate null space",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(())
}

pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    SteadyState::solve(l).map(|s| s.rho)
}

pub fn mean_photon_number(rho: &DensityMatrix, cfg: &HilbertConfig) -> f64 {
    rho.expect(&cfg.number().0).re
}

pub fn excited_population(rho: &DensityMatrix, cfg: &HilbertConfig) -> f64 {
    rho.expect(&cfg.sigma_e().0).re
}
