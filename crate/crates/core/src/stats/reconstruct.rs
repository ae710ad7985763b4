use serde::{Deserialize, Serialize};

use super::dips::OnOffRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedBin {
    pub t_start: f64,
    pub t_end: f64,
    /// Sequences with at least one detected event in the bin.
    pub measured: u64,
    /// N^m / M
    pub measured_fraction: f64,
    /// Mean number of atoms per sequence, -ln(1 - N^m/M).
    pub mean_atoms: f64,
    pub std_error: f64,
}

impl ReconstructedBin {
    pub fn center(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }

    /// Poisson probability of k atoms in this bin.
    pub fn probability(&self, k: u64) -> f64 {
        let lam = self.mean_atoms;
        if lam == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let ln_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
        (k as f64 * lam.ln() - lam - ln_fact).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedDistribution {
    pub sequences: u64,
    pub bin_time: f64,
    pub bins: Vec<ReconstructedBin>,
}

impl ReconstructedDistribution {
    pub fn total_mean_atoms(&self) -> f64 {
        self.bins.iter().map(|b| b.mean_atoms).sum()
    }

    pub fn total_measured(&self) -> u64 {
        self.bins.iter().map(|b| b.measured).sum()
    }
}

/// Inverts per-bin on/off fractions assuming Poissonian atom number.
/// `measured[i]` is the number of sequences (out of `sequences`) with an
/// event in bin i, which starts at `start + i * bin_time`.
pub fn reconstruct_from_counts(
    measured: &[u64],
    sequences: u64,
    start: f64,
    bin_time: f64,
) -> Result<ReconstructedDistribution> {
    if sequences == 0 {
        return Err(Error::Empty("no sequences"));
    }
    if !(bin_time > 0.0) {
        return Err(Error::InvalidParameter { field: "bin_time", reason: "must be positive".into() });
    }
    let m = sequences as f64;
    let bins = measured
        .iter()
        .enumerate()
        .map(|(i, &nm)| {
            if nm > sequences {
                return Err(Error::DimensionMismatch { expected: sequences as usize, actual: nm as usize });
            }
            if nm == sequences {
                return Err(Error::SaturatedBin { bin: i });
            }
            let p = nm as f64 / m;
            let mean = -(1.0 - p).ln();
            // delta method on the binomial fraction, count floored at one so
            // empty bins keep a finite error
            let se = ((nm.max(1) as f64) / (1.0 - p)).sqrt() / m;
            Ok(ReconstructedBin {
                t_start: start + i as f64 * bin_time,
                t_end: start + (i + 1) as f64 * bin_time,
                measured: nm,
                measured_fraction: p,
                mean_atoms: mean,
                std_error: se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReconstructedDistribution { sequences, bin_time, bins })
}

/// Bins event records over [start, end) and reconstructs the mean atom number per bin.
pub fn reconstruct_poisson(
    records: &[OnOffRecord],
    start: f64,
    end: f64,
    bin_time: f64,
) -> Result<ReconstructedDistribution> {
    if !(end > start) || !(bin_time > 0.0) {
        return Err(Error::InvalidParameter { field: "bin_time", reason: "need end > start and bin_time > 0".into() });
    }
    let n_bins = ((end - start) / bin_time).round() as usize;
    let mut measured = vec![0u64; n_bins];
    let mut hit = vec![false; n_bins];
    for rec in records {
        hit.iter_mut().for_each(|h| *h = false);
        for t in rec.event_times() {
            let x = (t - start) / bin_time;
            if x >= 0.0 && (x as usize) < n_bins {
                hit[x as usize] = true;
            }
        }
        for (m, &h) in measured.iter_mut().zip(&hit) {
            *m += h as u64;
        }
    }
    reconstruct_from_counts(&measured, records.len() as u64, start, bin_time)
}
