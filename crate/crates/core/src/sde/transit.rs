use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::{sde_step, RadiationTensor, SdeTerms, StepContext};
use super::table::{build_coefficient_table, QuantumCoefficientTable, TableGrid};
use crate::constants::PhysicalConstants;
use crate::error::{require, Error, Result};
use crate::fields::Vec3;
use crate::params::{ModeGeometry, PushBeamParams, SystemParams};
use crate::rng;
use crate::stats::ThresholdModel;
use crate::transport::TrajectoryState;

/// Count bin the conversion factor refers to.
pub const REFERENCE_COUNT_BIN: f64 = 50e-6;
/// Bare-cavity mean counts per reference bin.
pub const BARE_CAVITY_COUNTS: f64 = 180.29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerMode {
    /// Push switches on when a shot-noise count bin falls below threshold.
    Counts,
    /// Same rule on the expected counts, no shot noise.
    NoiseFree,
    /// The push keeps the turn-on time given in its parameters.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_max: f64,
    pub push: PushBeamParams,
    pub grid: TableGrid,
    pub rng_seed: u64,
    pub trigger: TriggerMode,
    /// Counts per unit <n> per reference bin.
    pub conversion_eta: f64,
    pub count_bin: f64,
    /// Sampling interval of the recorded <n> trace and trajectory.
    pub record_interval: f64,
    /// Entry velocity along z (negative: falling).
    pub entry_vz: f64,
    /// Entry height above the mode centre in units of w0.
    pub entry_height_w0: f64,
    pub terms: SdeTerms,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            dt: 0.1e-6,
            t_max: 3e-3,
            push: PushBeamParams::from_below(0.0),
            grid: TableGrid::default(),
            rng_seed: 0,
            trigger: TriggerMode::Counts,
            conversion_eta: BARE_CAVITY_COUNTS / 0.06,
            count_bin: REFERENCE_COUNT_BIN,
            record_interval: 1e-6,
            entry_vz: -0.3,
            entry_height_w0: 3.0,
            terms: SdeTerms::default(),
        }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be positive")?;
        require(self.t_max > self.dt, "t_max", "must exceed dt")?;
        require(self.conversion_eta > 0.0, "conversion_eta", "must be positive")?;
        require(self.count_bin >= self.dt, "count_bin", "must be at least dt")?;
        require(self.record_interval >= self.dt, "record_interval", "must be at least dt")?;
        require(self.entry_height_w0 > 0.0, "entry_height_w0", "must be positive")?;
        self.grid.validate()?;
        self.push.validate()
    }
}

/// Push-off and push-on tables for one parameter set.
#[derive(Debug, Clone)]
pub struct TablePair {
    pub push_off: QuantumCoefficientTable,
    pub push_on: QuantumCoefficientTable,
}

impl TablePair {
    pub fn build(params: &SystemParams, grid: &TableGrid, s0: f64) -> Result<Self> {
        let push_off = build_coefficient_table(params, grid, None)?;
        let push_on = if s0 > 0.0 { build_coefficient_table(params, grid, Some(s0))? } else { push_off.clone() };
        Ok(TablePair { push_off, push_on })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub n_mean: f64,
    pub counts: Option<u64>,
}

/// Cavity transmission against time, either sampled <n> or binned counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionTrace {
    pub interval: f64,
    pub points: Vec<TracePoint>,
}

impl TransmissionTrace {
    pub fn min_index(&self) -> Option<usize> {
        self.points.iter().enumerate().min_by(|a, b| a.1.n_mean.total_cmp(&b.1.n_mean)).map(|(i, _)| i)
    }

    /// Centered moving average of <n> over `window` samples.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let half = window / 2;
        let n = self.points.len();
        let mut prefix = vec![0.0; n + 1];
        for (i, p) in self.points.iter().enumerate() {
            prefix[i + 1] = prefix[i] + p.n_mean;
        }
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            })
            .collect()
    }

    /// Minimum of the smoothed trace.
    pub fn smoothed_min(&self, window: usize) -> Option<(usize, f64)> {
        self.smoothed(window).into_iter().enumerate().min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    LeftAbove,
    LeftBelow,
    LeftSideways,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitResult {
    pub id: u64,
    pub trajectory: Vec<TrajectoryState>,
    pub trace: TransmissionTrace,
    pub push_on_time: Option<f64>,
    /// Number of crossings of the plane z = -d.
    pub plane_crossings: usize,
    pub exit: ExitReason,
}

/// Entry point above the mode: x uniform over one wavelength, y uniform in [-w0, w0].
pub fn sample_entry_state<R: Rng + ?Sized>(
    cfg: &SdeConfig,
    geom: &ModeGeometry,
    constants: &PhysicalConstants,
    rng: &mut R,
) -> TrajectoryState {
    let x = rng.random_range(0.0..constants.lambda_probe);
    let y = rng.random_range(-geom.w0..=geom.w0);
    let z = -geom.d + cfg.entry_height_w0 * geom.w0;
    TrajectoryState::new(Vec3::new(x, y, z), Vec3::new(0.0, 0.0, cfg.entry_vz), 0.0)
}

/// Integrates one atom through the mode with the push-below trigger.
pub fn run_single_transit(
    id: u64,
    initial: TrajectoryState,
    cfg: &SdeConfig,
    tables: &TablePair,
    params: &SystemParams,
    geom: &ModeGeometry,
    constants: &PhysicalConstants,
) -> Result<TransitResult> {
    let mut rng = rng::stream(cfg.rng_seed, id);
    let mut push = cfg.push;
    if cfg.trigger != TriggerMode::Fixed {
        push.turn_on_time = f64::INFINITY;
    }
    let bare = tables.push_off.interpolate(0.0, 0.0, 0.0).n_mean;
    let counts_scale = cfg.conversion_eta * cfg.count_bin / REFERENCE_COUNT_BIN;
    let c_bar = counts_scale * bare;
    let threshold = ThresholdModel::from_peak(c_bar, c_bar.sqrt(), cfg.conversion_eta).threshold_counts();

    let record_every = ((cfg.record_interval / cfg.dt).round() as usize).max(1);
    let bin_steps = ((cfg.count_bin / cfg.dt).round() as usize).max(1);
    // the count-bin grid has a random phase relative to the atom
    let mut bin_pos = match cfg.trigger {
        TriggerMode::Counts => rng.random_range(0..bin_steps),
        _ => 0,
    };
    // the leading partial bin never triggers
    let mut bin_complete = bin_pos == 0;
    let mut bin_acc = 0.0;

    let upper = -geom.d + (cfg.entry_height_w0 + 0.5) * geom.w0;
    let lower = -geom.d - 8.0 * geom.w0;
    let side = 4.0 * geom.w0;

    let mut state = initial;
    let mut trajectory = vec![state];
    let mut points = Vec::new();
    let mut crossings = 0;
    let mut step = 0usize;
    let exit = loop {
        let (q, next) = {
            let ctx = StepContext {
                params,
                geom,
                constants,
                push: &push,
                push_off_table: &tables.push_off,
                push_on_table: &tables.push_on,
                tensor: RadiationTensor::default(),
                terms: cfg.terms,
                dt: cfg.dt,
            };
            let (q, _, _) = ctx.local(&state);
            (q, sde_step(&state, &ctx, &mut rng)?)
        };
        if step % record_every == 0 {
            points.push(TracePoint { t: state.t, n_mean: q.n_mean, counts: None });
        }
        bin_acc += q.n_mean;
        bin_pos += 1;
        if bin_pos >= bin_steps {
            if bin_complete && push.turn_on_time.is_infinite() && cfg.trigger != TriggerMode::Fixed && push.s0 > 0.0 {
                let mean = counts_scale * bin_acc / bin_steps as f64;
                let c = match cfg.trigger {
                    TriggerMode::Counts => sample_poisson(mean, &mut rng) as f64,
                    _ => mean,
                };
                if c < threshold {
                    push.turn_on_time = next.t;
                }
            }
            bin_pos = 0;
            bin_acc = 0.0;
            bin_complete = true;
        }
        if (state.pos.z - (-geom.d)) * (next.pos.z - (-geom.d)) < 0.0 {
            crossings += 1;
        }
        state = next;
        step += 1;
        if step % record_every == 0 {
            trajectory.push(state);
        }
        if state.pos.z > upper {
            break ExitReason::LeftAbove;
        }
        if state.pos.z < lower {
            break ExitReason::LeftBelow;
        }
        if state.pos.y.abs() > side {
            break ExitReason::LeftSideways;
        }
        if state.t >= cfg.t_max {
            break ExitReason::Timeout;
        }
    };
    Ok(TransitResult {
        id,
        trajectory,
        trace: TransmissionTrace { interval: cfg.dt * record_every as f64, points },
        push_on_time: push.turn_on_time.is_finite().then_some(push.turn_on_time),
        plane_crossings: crossings,
        exit,
    })
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Runs `n` transits in parallel with per-transit RNG streams.
pub fn run_transit_ensemble(
    n: usize,
    cfg: &SdeConfig,
    tables: &TablePair,
    params: &SystemParams,
    geom: &ModeGeometry,
    constants: &PhysicalConstants,
) -> Result<Vec<TransitResult>> {
    cfg.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|id| {
            // entry states use a stream disjoint from the step noise
            let mut r = rng::stream(cfg.rng_seed ^ 0x5eed_0f_e27e, id);
            let init = sample_entry_state(cfg, geom, constants, &mut r);
            run_single_transit(id, init, cfg, tables, params, geom, constants)
        })
        .collect()
}

/// Re-bins a sampled trace and draws shot-noise counts,
/// mean = conversion_eta * <n> * bin_time / REFERENCE_COUNT_BIN.
pub fn synthesize_counts<R: Rng + ?Sized>(
    trace: &TransmissionTrace,
    conversion_eta: f64,
    bin_time: f64,
    rng: &mut R,
) -> Result<TransmissionTrace> {
    require(conversion_eta > 0.0, "conversion_eta", "must be positive")?;
    require(bin_time >= trace.interval, "bin_time", "must be at least the sample interval")?;
    let per_bin = ((bin_time / trace.interval).round() as usize).max(1);
    let points = trace
        .points
        .chunks(per_bin)
        .filter(|c| c.len() == per_bin)
        .map(|chunk| {
            let n = chunk.iter().map(|p| p.n_mean).sum::<f64>() / per_bin as f64;
            let mean = conversion_eta * n * bin_time / REFERENCE_COUNT_BIN;
            TracePoint { t: chunk[0].t, n_mean: n, counts: Some(sample_poisson(mean, rng)) }
        })
        .collect();
    Ok(TransmissionTrace { interval: bin_time, points })
}

/// Pointwise mean of traces aligned on their minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedTrace {
    /// Time relative to the dip minimum.
    pub t: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub used: usize,
    /// Traces without a dip below `dip_level`.
    pub excluded: usize,
}

impl AveragedTrace {
    /// Full width at half depth between the baseline `base` and the minimum.
    pub fn fwhm(&self, base: f64) -> Option<f64> {
        let (imin, &min) = self.n_mean.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        let half = 0.5 * (base + min);
        let left = (0..imin).rev().find(|&i| self.n_mean[i] >= half)?;
        let right = (imin..self.n_mean.len()).find(|&i| self.n_mean[i] >= half)?;
        Some(self.t[right] - self.t[left])
    }

    /// Dip area (base - n) integrated over `half_window` before and after the
    /// alignment point.
    pub fn half_areas(&self, base: f64, half_window: f64) -> (f64, f64) {
        let imin = self.t.iter().position(|&t| t == 0.0).unwrap_or(0);
        let dt = if self.t.len() > 1 { self.t[1] - self.t[0] } else { 1.0 };
        let w = ((half_window / dt).round() as usize).min(imin).min(self.t.len() - 1 - imin);
        let area = |r: std::ops::Range<usize>| r.map(|i| (base - self.n_mean[i]).max(0.0)).sum::<f64>() * dt;
        (area(imin - w..imin), area(imin + 1..imin + 1 + w))
    }
}

impl TransmissionTrace {
    /// Number of separate excursions of the smoothed trace below `level`.
    pub fn count_dips(&self, level: f64, smoothing: usize) -> usize {
        let mut n = 0;
        let mut below = false;
        for v in self.smoothed(smoothing.max(1)) {
            let b = v < level;
            if b && !below {
                n += 1;
            }
            below = b;
        }
        n
    }
}

pub fn average_transits(traces: &[TransmissionTrace], dip_level: f64, smoothing: usize) -> Result<AveragedTrace> {
    if traces.is_empty() {
        return Err(Error::Empty("no traces"));
    }
    let interval = traces[0].interval;
    if traces.iter().any(|t| (t.interval - interval).abs() > 1e-12 * interval) {
        return Err(Error::InvalidParameter { field: "traces", reason: "sample intervals differ".into() });
    }
    let with_dip: Vec<(&TransmissionTrace, usize)> = traces
        .iter()
        .filter_map(|t| t.smoothed_min(smoothing.max(1)).filter(|&(_, v)| v < dip_level).map(|(i, _)| (t, i)))
        .collect();
    let excluded = traces.len() - with_dip.len();
    if with_dip.is_empty() {
        return Err(Error::Empty("no trace has a dip"));
    }
    // traces start and end outside the mode; shorter ones are padded with
    // their edge values so the window is not cut to the shortest trace
    let left = with_dip.iter().map(|(_, i)| *i).max().unwrap_or(0);
    let right = with_dip.iter().map(|(t, i)| t.points.len() - 1 - i).max().unwrap_or(0);
    let len = left + right + 1;
    let mut sum = vec![0.0; len];
    for (trace, i) in &with_dip {
        let n = trace.points.len() as isize;
        for (k, s) in sum.iter_mut().enumerate() {
            let j = (*i as isize - left as isize + k as isize).clamp(0, n - 1) as usize;
            *s += trace.points[j].n_mean;
        }
    }
    let used = with_dip.len();
    Ok(AveragedTrace {
        t: (0..len).map(|k| (k as f64 - left as f64) * interval).collect(),
        n_mean: sum.into_iter().map(|s| s / used as f64).collect(),
        used,
        excluded,
    })
}
