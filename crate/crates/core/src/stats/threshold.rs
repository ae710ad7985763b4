use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::levenberg_marquardt;

/// Gaussian model of the bare-cavity count peak and the derived atom threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub c_bar: f64,
    pub sigma: f64,
    /// Gaussian amplitude (histogram frequency at the peak).
    pub amplitude: f64,
    pub conversion_eta: f64,
    /// (c_bar - 4 sigma) / conversion_eta
    pub n_th: f64,
    pub eta_over: f64,
    pub eta_miss: f64,
    pub n_sm: f64,
    pub n_shot: f64,
    pub n_atom: f64,
    pub n_la: f64,
    /// sigma differs from sqrt(c_bar) by more than a factor 2.
    pub non_poissonian: bool,
}

impl ThresholdModel {
    pub const SIGMA_MULTIPLE: f64 = 4.0;

    /// Model with known peak statistics and no histogram-derived error rates.
    pub fn from_peak(c_bar: f64, sigma: f64, conversion_eta: f64) -> Self {
        ThresholdModel {
            c_bar,
            sigma,
            amplitude: 0.0,
            conversion_eta,
            n_th: (c_bar - Self::SIGMA_MULTIPLE * sigma) / conversion_eta,
            eta_over: 0.0,
            eta_miss: 0.0,
            n_sm: 0.0,
            n_shot: 0.0,
            n_atom: 0.0,
            n_la: 0.0,
            non_poissonian: !(0.5..=2.0).contains(&(sigma / c_bar.sqrt())),
        }
    }

    /// Threshold in count space, c_bar - 4 sigma.
    pub fn threshold_counts(&self) -> f64 {
        self.c_bar - Self::SIGMA_MULTIPLE * self.sigma
    }

    pub fn gaussian(&self, x: f64) -> f64 {
        let z = (x - self.c_bar) / self.sigma;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

/// Frequency of each count value: `hist[c]` is the number of bins with `c` counts.
pub fn count_histogram(counts: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut hist: Vec<u64> = Vec::new();
    for c in counts {
        let c = c as usize;
        if c >= hist.len() {
            hist.resize(c + 1, 0);
        }
        hist[c] += 1;
    }
    hist
}

fn smoothed(hist: &[u64], half: usize) -> Vec<f64> {
    (0..hist.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(hist.len());
            hist[lo..hi].iter().sum::<u64>() as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Fits y = c exp(-((x - C)/sigma)^2 / 2) to the dominant peak of a count
/// histogram and derives the 4-sigma threshold together with the
/// overcounting and missing probabilities.
pub fn fit_threshold(histogram: &[u64], conversion_eta: f64) -> Result<ThresholdModel> {
    if !(conversion_eta > 0.0) {
        return Err(Error::InvalidParameter { field: "conversion_eta", reason: "must be positive".into() });
    }
    let total: u64 = histogram.iter().sum();
    if total < 10 {
        return Err(Error::NoDominantPeak);
    }
    let smooth = smoothed(histogram, 2);
    let (peak, &peak_val) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoDominantPeak)?;
    if peak == 0 || peak_val < 3.0 {
        return Err(Error::NoDominantPeak);
    }
    // width from the upper half-maximum crossing, which atoms do not populate
    let half = 0.5 * peak_val;
    let upper = (peak..smooth.len()).find(|&i| smooth[i] < half).unwrap_or(smooth.len() - 1);
    let sigma0 = ((upper as f64 - peak as f64) / 1.1774).max(1.0);

    let lo = (peak as f64 - 2.0 * sigma0).floor().max(0.0) as usize;
    let hi = ((peak as f64 + 4.0 * sigma0).ceil() as usize).min(histogram.len() - 1);
    let xs: Vec<f64> = (lo..=hi).map(|x| x as f64).collect();
    let ys: Vec<f64> = (lo..=hi).map(|x| histogram[x] as f64).collect();
    let sig: Vec<f64> = ys.iter().map(|y| y.max(1.0).sqrt()).collect();
    if xs.len() < 4 {
        return Err(Error::NoDominantPeak);
    }
    let model = |x: f64, p: &[f64]| {
        let z = (x - p[1]) / p[2];
        p[0] * (-0.5 * z * z).exp()
    };
    let fit = levenberg_marquardt(model, &xs, &ys, &sig, &[peak_val, peak as f64, sigma0], 500, false)?;
    let (amplitude, c_bar, sigma) = (fit.params[0], fit.params[1], fit.params[2].abs());
    if !(c_bar > 0.0 && sigma > 0.0 && amplitude > 0.0) {
        return Err(Error::NoDominantPeak);
    }

    let mut m = ThresholdModel::from_peak(c_bar, sigma, conversion_eta);
    m.amplitude = amplitude;
    let thr = m.threshold_counts();
    let (mut n_sm, mut n_shot, mut n_atom, mut n_la) = (0.0, 0.0, 0.0, 0.0);
    for (x, &freq) in histogram.iter().enumerate() {
        let x = x as f64;
        let obs = freq as f64;
        let g = m.gaussian(x);
        if x < thr {
            n_sm += obs;
            n_shot += obs.min(g);
        }
        if x < c_bar {
            // signed: clipping each residual at zero would turn shot noise
            // on a large histogram into phantom atom counts
            let excess = obs - g;
            n_atom += excess;
            if x >= thr {
                n_la += excess;
            }
        }
    }
    let n_atom = n_atom.max(0.0);
    let n_la = n_la.clamp(0.0, n_atom);
    m.n_sm = n_sm;
    m.n_shot = n_shot;
    m.n_atom = n_atom;
    m.n_la = n_la;
    m.eta_over = if n_sm > 0.0 { n_shot / n_sm } else { 0.0 };
    m.eta_miss = if n_atom > 0.0 { n_la / n_atom } else { 0.0 };
    Ok(m)
}
