//! Shared inputs for the solver benchmarks.

use pushsim::quantum::{build_interaction_hamiltonian, build_liouvillian, HilbertConfig, Liouvillian, LocalCouplings};
use pushsim::sde::TableGrid;
use pushsim::SystemParams;

/// Liouvillian at the mode centre with the default parameters.
pub fn centre_liouvillian(fock_cutoff: usize) -> Liouvillian {
    let p = SystemParams::default();
    let cfg = HilbertConfig::new(fock_cutoff).expect("cutoff >= 2");
    let h = build_interaction_hamiltonian(&p, &LocalCouplings::new(p.g0, p.delta_st_max, 0.0), &cfg)
        .expect("valid hamiltonian");
    build_liouvillian(&h, &p, &cfg).expect("valid liouvillian")
}

/// A coarse table grid so one build fits in a benchmark sample.
pub fn small_grid() -> TableGrid {
    TableGrid { n_coupling: 21, n_stark: 3, n_saturation: 5, fock_cutoff: 4 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(centre_liouvillian(3).hilbert_dim(), 8);
        assert!(small_grid().validate().is_ok());
    }
}
