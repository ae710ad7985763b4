use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::fields::rabi_from_saturation;
use crate::params::SystemParams;
use crate::quantum::{local_quantities, HilbertConfig, LocalCouplings, LocalQuantities};

/// Grid resolution of the coefficient tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    /// Points along g in [-g0, g0].
    pub n_coupling: usize,
    /// Points along the Stark shift in [delta_st_max, 0].
    pub n_stark: usize,
    /// Points along s in [0, s0] (push-on table only), evenly spaced in sqrt(s),
    /// i.e. in push Rabi frequency.
    pub n_saturation: usize,
    pub fock_cutoff: usize,
}

impl Default for TableGrid {
    fn default() -> Self {
        TableGrid { n_coupling: 81, n_stark: 5, n_saturation: 17, fock_cutoff: 4 }
    }
}

impl TableGrid {
    pub fn validate(&self) -> Result<()> {
        require(self.n_coupling >= 3, "n_coupling", "need at least 3 points")?;
        require(self.n_stark >= 2, "n_stark", "need at least 2 points")?;
        require(self.n_saturation >= 2, "n_saturation", "need at least 2 points")?;
        require(self.fock_cutoff >= 2, "fock_cutoff", "must be at least 2")
    }
}

/// Steady-state quantities tabulated over local coupling g, Stark shift and
/// push saturation; positions enter only through these three numbers.
#[derive(Debug, Clone)]
pub struct QuantumCoefficientTable {
    coupling: Vec<f64>,
    stark: Vec<f64>,
    saturation: Vec<f64>,
    /// sqrt of the saturation grid, the interpolation coordinate
    rabi_axis: Vec<f64>,
    values: Vec<LocalQuantities>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Bracketing index and weight for linear interpolation on a sorted grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if n == 1 {
        return (0, 0.0);
    }
    if x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|&v| v <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

fn blend(a: &LocalQuantities, b: &LocalQuantities, w: f64) -> LocalQuantities {
    let l = |x: f64, y: f64| x + w * (y - x);
    LocalQuantities {
        phi_mean: l(a.phi_mean, b.phi_mean),
        xi: l(a.xi, b.xi),
        chi: l(a.chi, b.chi),
        sigma_e: l(a.sigma_e, b.sigma_e),
        n_mean: l(a.n_mean, b.n_mean),
    }
}

impl QuantumCoefficientTable {
    /// Table with the same entry everywhere (for isolating force terms).
    pub fn constant(q: LocalQuantities) -> Self {
        QuantumCoefficientTable {
            coupling: vec![0.0],
            stark: vec![0.0],
            saturation: vec![0.0],
            rabi_axis: vec![0.0],
            values: vec![q],
        }
    }

    pub fn coupling_grid(&self) -> &[f64] {
        &self.coupling
    }

    pub fn stark_grid(&self) -> &[f64] {
        &self.stark
    }

    pub fn saturation_grid(&self) -> &[f64] {
        &self.saturation
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn at(&self, ig: usize, ist: usize, is: usize) -> &LocalQuantities {
        &self.values[(ig * self.stark.len() + ist) * self.saturation.len() + is]
    }

    /// Stored entry at grid indices (g, Stark, s).
    pub fn entry(&self, ig: usize, ist: usize, is: usize) -> LocalQuantities {
        *self.at(ig, ist, is)
    }

    /// Multilinear interpolation; arguments outside the grid are clamped.
    pub fn interpolate(&self, g: f64, stark: f64, s: f64) -> LocalQuantities {
        let (ig, wg) = locate(&self.coupling, g);
        let (ist, wst) = locate(&self.stark, stark);
        let (is, ws) = locate(&self.rabi_axis, s.max(0.0).sqrt());
        let ng = (ig + 1).min(self.coupling.len() - 1);
        let nst = (ist + 1).min(self.stark.len() - 1);
        let ns = (is + 1).min(self.saturation.len() - 1);
        let along_s = |a: usize, b: usize| blend(self.at(a, b, is), self.at(a, b, ns), ws);
        let along_st = |a: usize| blend(&along_s(a, ist), &along_s(a, nst), wst);
        blend(&along_st(ig), &along_st(ng), wg)
    }
}

/// Solves the local steady state on every grid node. With `push_s0` the push
/// drive Omega = gamma sqrt(2 s) enters the Hamiltonian and s spans [0, s0];
/// without it the table has the single slice s = 0.
pub fn build_coefficient_table(
    params: &SystemParams,
    grid: &TableGrid,
    push_s0: Option<f64>,
) -> Result<QuantumCoefficientTable> {
    params.validate()?;
    grid.validate()?;
    let hilbert = HilbertConfig::new(grid.fock_cutoff)?;
    let coupling = linspace(-params.g0, params.g0, grid.n_coupling);
    let (lo, hi) = if params.delta_st_max <= 0.0 { (params.delta_st_max, 0.0) } else { (0.0, params.delta_st_max) };
    let stark = if lo == hi { vec![0.0] } else { linspace(lo, hi, grid.n_stark) };
    let saturation = match push_s0 {
        Some(s0) if s0 > 0.0 => (0..grid.n_saturation)
            .map(|i| s0 * (i as f64 / (grid.n_saturation - 1) as f64).powi(2))
            .collect(),
        Some(s0) if s0 < 0.0 || !s0.is_finite() => {
            return Err(Error::InvalidParameter { field: "s0", reason: "must be >= 0".into() })
        }
        _ => vec![0.0],
    };
    let mut nodes = Vec::with_capacity(coupling.len() * stark.len() * saturation.len());
    for &g in &coupling {
        for &st in &stark {
            for &s in &saturation {
                nodes.push((g, st, s));
            }
        }
    }
    let values = nodes
        .par_iter()
        .map(|&(g, st, s)| {
            let local = LocalCouplings::new(g, st, rabi_from_saturation(s, params.gamma));
            local_quantities(params, &local, &hilbert).map_err(|e| Error::TableSolve {
                g,
                stark: st,
                saturation: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rabi_axis = saturation.iter().map(|s| s.sqrt()).collect();
    Ok(QuantumCoefficientTable { coupling, stark, saturation, rabi_axis, values })
}
