use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dips::OnOffRecord;
use super::reconstruct::ReconstructedDistribution;
use crate::error::{require, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Options {
    pub tau_bin: f64,
    pub tau_max: f64,
    /// Spacing of consecutive sequences on the concatenated time axis.
    pub sequence_period: f64,
}

impl Default for G2Options {
    fn default() -> Self {
        G2Options { tau_bin: 1e-3, tau_max: 150e-3, sequence_period: super::DEFAULT_SEQUENCE_WINDOW }
    }
}

impl G2Options {
    pub fn validate(&self) -> Result<()> {
        require(self.tau_bin > 0.0, "tau_bin", "must be positive")?;
        require(self.tau_max > self.tau_bin, "tau_max", "must exceed tau_bin")?;
        require(self.sequence_period > 0.0, "sequence_period", "must be positive")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Point {
    /// Left edge of the delay bin.
    pub tau: f64,
    pub g2: f64,
    pub stderr: f64,
    pub pairs: u64,
}

/// Intensity correlation of detected arrivals.
///
/// With `reconstructed` given, the atoms hidden in multi-atom bins (mean
/// atoms times M minus the sequences that saw an event) are added back: the
/// fractional count is rounded stochastically and each extra event gets a
/// random sequence and a uniform time inside its bin. Sequences are laid end
/// to end with period `sequence_period` and ordered pairs are histogrammed in
/// delay. Each bin is normalized by the pair count expected from the
/// time-averaged rate on a record of the same total length.
pub fn g2_correlation<R: Rng + ?Sized>(
    records: &[OnOffRecord],
    reconstructed: Option<&ReconstructedDistribution>,
    opts: &G2Options,
    rng: &mut R,
) -> Result<Vec<G2Point>> {
    opts.validate()?;
    if records.is_empty() {
        return Err(Error::Empty("event records"));
    }
    let m = records.len();
    let period = opts.sequence_period;
    let mut times: Vec<f64> = Vec::new();
    for (s, rec) in records.iter().enumerate() {
        times.extend(rec.event_times().filter(|&t| (0.0..period).contains(&t)).map(|t| s as f64 * period + t));
    }
    if let Some(rd) = reconstructed {
        for b in &rd.bins {
            let extra = (b.mean_atoms * rd.sequences as f64 - b.measured as f64).max(0.0);
            let n = extra.floor() as u64 + (rng.random::<f64>() < extra.fract()) as u64;
            for _ in 0..n {
                let s = rng.random_range(0..m);
                let t = b.t_start + rng.random::<f64>() * (b.t_end - b.t_start);
                if (0.0..period).contains(&t) {
                    times.push(s as f64 * period + t);
                }
            }
        }
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    if n < 2 {
        return Err(Error::Empty("fewer than two events"));
    }

    let n_tau = (opts.tau_max / opts.tau_bin).round() as usize;
    let mut pairs = vec![0u64; n_tau];
    for i in 0..n {
        for j in i + 1..n {
            let dt = times[j] - times[i];
            if dt >= opts.tau_max {
                break;
            }
            let k = (dt / opts.tau_bin) as usize;
            if k < n_tau {
                pairs[k] += 1;
            }
        }
    }

    let total = m as f64 * period;
    let density = n as f64 * (n as f64 - 1.0) / (total * total);
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let a = k as f64 * opts.tau_bin;
            let b = a + opts.tau_bin;
            let expected = density * 0.5 * ((total - a).max(0.0).powi(2) - (total - b).max(0.0).powi(2));
            G2Point { tau: a, g2: c as f64 / expected, stderr: (c as f64).max(1.0).sqrt() / expected, pairs: c }
        })
        .collect())
}

/// g2(tau) = <P(t) P(t + tau)> / <P>^2 for an envelope repeating with `period`.
pub fn g2_from_envelope<F: Fn(f64) -> f64>(envelope: F, period: f64, tau: f64, samples: usize) -> f64 {
    let h = period / samples as f64;
    let p: Vec<f64> = (0..samples).map(|i| envelope((i as f64 + 0.5) * h)).collect();
    let mean = p.iter().sum::<f64>() / samples as f64;
    let shift = tau.rem_euclid(period) / h;
    let (k, frac) = (shift.floor() as usize, shift.fract());
    let corr = (0..samples)
        .map(|i| {
            let a = p[(i + k) % samples];
            let b = p[(i + k + 1) % samples];
            p[i] * (a + frac * (b - a))
        })
        .sum::<f64>()
        / samples as f64;
    corr / (mean * mean)
}
