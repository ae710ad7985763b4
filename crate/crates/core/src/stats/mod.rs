//! Photon-count analysis: thresholding, dip detection, multi-atom
//! reconstruction, arrival-time model fitting and second-order correlation.

mod arrival;
mod dips;
mod g2;
mod reconstruct;
mod threshold;

pub use arrival::{
    arrival_moments, arrival_pdf, fit_arrival, free_fall_time, jacobian, sample_arrival_time, ArrivalFit,
    ArrivalModelParams,
};
pub use dips::{detect_dips, CountStream, DipEvent, OnOffRecord};
pub use g2::{g2_correlation, g2_from_envelope, G2Options, G2Point};
pub use reconstruct::{reconstruct_from_counts, reconstruct_poisson, ReconstructedBin, ReconstructedDistribution};
pub use threshold::{count_histogram, fit_threshold, ThresholdModel};

/// Default dead time 2 w0 / v_z for a 0.3 m/s atom.
pub const DEFAULT_DEAD_TIME: f64 = 175e-6;
/// Bin time of the arrival histograms.
pub const DEFAULT_ARRIVAL_BIN: f64 = 500e-6;
/// Length of the recorded window per sequence.
pub const DEFAULT_SEQUENCE_WINDOW: f64 = 60e-3;
