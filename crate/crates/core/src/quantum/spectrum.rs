use rayon::prelude::*;

use super::liouvillian::build_liouvillian;
use super::operators::{build_interaction_hamiltonian, HilbertConfig, LocalCouplings};
use super::steady::{mean_photon_number, steady_state};
use crate::constants::angular_to_mhz;
use crate::error::Result;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    /// Delta_ap / 2 pi in MHz.
    pub detuning_mhz: f64,
    pub mean_photon_number: f64,
}

/// Scans the probe with the cavity locked to the atom, so Delta_ap = Delta_cp
/// at every grid point (rad/s).
pub fn transmission_spectrum(
    params: &SystemParams,
    local: &LocalCouplings,
    cfg: &HilbertConfig,
    detuning_grid: &[f64],
) -> Result<Vec<SpectrumPoint>> {
    detuning_grid
        .par_iter()
        .map(|&delta| {
            let p = SystemParams { delta_ap: delta, delta_cp: delta, ..*params };
            let h = build_interaction_hamiltonian(&p, local, cfg)?;
            let l = build_liouvillian(&h, &p, cfg)?;
            let rho = steady_state(&l)?;
            Ok(SpectrumPoint {
                detuning_mhz: angular_to_mhz(delta),
                mean_photon_number: mean_photon_number(&rho, cfg),
            })
        })
        .collect()
}

/// Indices of strict local maxima.
pub fn local_maxima(points: &[SpectrumPoint]) -> Vec<usize> {
    (1..points.len().saturating_sub(1))
        .filter(|&i| {
            let v = points[i].mean_photon_number;
            v > points[i - 1].mean_photon_number && v > points[i + 1].mean_photon_number
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::mhz_to_angular;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| mhz_to_angular(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn empty_cavity_half_width_is_kappa() {
        let cfg = HilbertConfig::new(4).unwrap();
        let base = SystemParams::default();
        let p = SystemParams { eta_drive: base.kappa / 10.0, ..base };
        let kappa_mhz = angular_to_mhz(p.kappa);
        let pts = transmission_spectrum(&p, &LocalCouplings::default(), &cfg, &[0.0, p.kappa]).unwrap();
        assert!((pts[1].detuning_mhz - kappa_mhz).abs() < 1e-9);
        let ratio = pts[1].mean_photon_number / pts[0].mean_photon_number;
        assert!((ratio - 0.5).abs() < 0.005, "{ratio}");
    }

    #[test]
    fn coupled_spectrum_symmetric_without_stark_shift() {
        let cfg = HilbertConfig::new(4).unwrap();
        let p = SystemParams::default();
        let local = LocalCouplings::new(p.g0, 0.0, 0.0);
        let g = grid(-40.0, 40.0, 17);
        let pts = transmission_spectrum(&p, &local, &cfg, &g).unwrap();
        for i in 0..pts.len() {
            let j = pts.len() - 1 - i;
            let a = pts[i].mean_photon_number;
            let b = pts[j].mean_photon_number;
            assert!((a - b).abs() <= 1e-6 * a.max(b), "{a} {b}");
        }
    }

    #[test]
    fn stark_shift_breaks_symmetry() {
        let cfg = HilbertConfig::new(4).unwrap();
        let p = SystemParams::default();
        let local = LocalCouplings::new(p.g0, mhz_to_angular(-1.0), 0.0);
        let pts = transmission_spectrum(&p, &local, &cfg, &[-p.g0, p.g0]).unwrap();
        let (a, b) = (pts[0].mean_photon_number, pts[1].mean_photon_number);
        assert!((a - b).abs() > 1e-3 * a.max(b), "{a} {b}");
    }
}
