//! Semiclassical trajectories inside the cavity mode.
//!
//! The atom moves classically under the cavity dipole force, cavity friction,
//! dipole-force and recoil diffusion, gravity and the push beam from below.
//! Internal-state quantities come from interpolated steady-state tables.

mod integrator;
mod table;
mod transit;

pub use integrator::{sde_step, RadiationTensor, SdeTerms, StepContext};
pub use table::{build_coefficient_table, QuantumCoefficientTable, TableGrid};
pub use transit::{
    average_transits, run_single_transit, run_transit_ensemble, sample_entry_state, synthesize_counts, AveragedTrace,
    ExitReason, SdeConfig, TablePair, TracePoint, TransitResult, TransmissionTrace, TriggerMode, BARE_CAVITY_COUNTS,
    REFERENCE_COUNT_BIN,
};
