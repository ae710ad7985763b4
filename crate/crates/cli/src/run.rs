//! Mode dispatch. All randomness derives from the run seed through
//! per-purpose ChaCha streams.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use pushsim::quantum::{local_maxima, transmission_spectrum, HilbertConfig, LocalCouplings};
use pushsim::sde::{average_transits, run_transit_ensemble, synthesize_counts, TablePair, TransitResult, REFERENCE_COUNT_BIN};
use pushsim::stats::{
    count_histogram, detect_dips, fit_arrival, fit_threshold, g2_correlation, reconstruct_poisson, ArrivalFit,
    CountStream, OnOffRecord, ReconstructedBin, ReconstructedDistribution, ThresholdModel,
};
use pushsim::transport::{run_transport, TransportResult};
use pushsim::{rng, PhysicalConstants};

use crate::config::{LoadedConfig, Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{num, CsvTable, EmittedFile, OutputDir};

// stream ids for the independent random purposes of a run
const STREAM_SEQUENCES: u64 = 0x5e00_0000;
const STREAM_COUNTS: u64 = 0xc0_0000;
const STREAM_G2: u64 = 0x92;

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub program: String,
    pub version: String,
    pub mode: String,
    pub rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_source: Option<String>,
    /// Resolved configuration after overrides, as TOML.
    pub config: String,
    pub defaulted_sections: Vec<String>,
    pub overrides: Vec<String>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub files: Vec<EmittedFile>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs `mode` and writes its outputs plus `manifest.json` into `out_dir`.
pub fn run(mode: Mode, loaded: &LoadedConfig, overrides: &[String], out_dir: &Path) -> CliResult<RunManifest> {
    let started = now();
    let cfg = &loaded.config;
    let mut out = OutputDir::create(out_dir)?;
    match mode {
        Mode::Spectrum => run_spectrum(cfg, &mut out)?,
        Mode::Transport => run_transport_mode(cfg, &mut out)?,
        Mode::Trajectory => run_trajectory(cfg, &mut out)?,
        Mode::Analyze => run_analyze(cfg, &mut out)?,
        Mode::ReferencePipeline => run_reference_pipeline(cfg, &mut out)?,
    }
    let mut snapshot = cfg.clone();
    snapshot.mode = Some(mode);
    let manifest = RunManifest {
        program: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: mode.name().into(),
        rng_seed: cfg.rng_seed,
        config_source: loaded.source.as_ref().map(|p| p.display().to_string()),
        config: snapshot.to_toml(),
        defaulted_sections: loaded.defaulted_sections.clone(),
        overrides: overrides.to_vec(),
        started_unix_s: started,
        finished_unix_s: now(),
        files: out.files().to_vec(),
    };
    let path = out.root().join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

#[allow(non_snake_case)]
#[derive(Serialize)]
struct SpectrumReport {
    cooperativity: f64,
    critical_photon_number: f64,
    eta_drive_over_2pi_MHz: f64,
    empty_peak_photons: f64,
    coupled_maxima_MHz: Vec<f64>,
    coupled_on_resonance_photons: Option<f64>,
}

fn run_spectrum(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<()> {
    let p = cfg.system_params();
    let s = &cfg.spectrum;
    let hc = HilbertConfig::new(s.fock_cutoff)?;
    let step = (s.scan_max_MHz - s.scan_min_MHz) / (s.n_points - 1) as f64;
    let grid: Vec<f64> =
        (0..s.n_points).map(|i| pushsim::constants::mhz_to_angular(s.scan_min_MHz + step * i as f64)).collect();
    let empty = transmission_spectrum(&p, &LocalCouplings::new(0.0, 0.0, 0.0), &hc, &grid)?;
    let coupled = transmission_spectrum(&p, &LocalCouplings::new(p.g0, p.delta_st_max, 0.0), &hc, &grid)?;
    let mut t = CsvTable::new(&["detuning_MHz", "n_empty", "n_coupled"]);
    for (e, c) in empty.iter().zip(&coupled) {
        t.row(vec![num(e.detuning_mhz), num(e.mean_photon_number), num(c.mean_photon_number)]);
    }
    out.write_csv("spectrum.csv", &t)?;
    let on_res = coupled.iter().find(|c| c.detuning_mhz.abs() < 1e-9).map(|c| c.mean_photon_number);
    out.write_json(
        "spectrum_report.json",
        &SpectrumReport {
            cooperativity: p.cooperativity(),
            critical_photon_number: p.critical_photon_number(),
            eta_drive_over_2pi_MHz: pushsim::constants::angular_to_mhz(p.eta_drive),
            empty_peak_photons: empty.iter().map(|e| e.mean_photon_number).fold(0.0, f64::max),
            coupled_maxima_MHz: local_maxima(&coupled).into_iter().map(|i| coupled[i].detuning_mhz).collect(),
            coupled_on_resonance_photons: on_res,
        },
    )
}

#[derive(Serialize)]
struct FitReport {
    c: f64,
    #[serde(rename = "T_uK")]
    t_uk: f64,
    d_mm: f64,
    c_stderr: f64,
    #[serde(rename = "T_uK_stderr")]
    t_uk_stderr: f64,
    d_mm_stderr: f64,
    chi_square: f64,
    dof: usize,
    iterations: usize,
}

impl From<&ArrivalFit> for FitReport {
    fn from(f: &ArrivalFit) -> Self {
        FitReport {
            c: f.params.c,
            t_uk: f.params.temperature * 1e6,
            d_mm: f.params.d * 1e3,
            c_stderr: f.std_errors[0],
            t_uk_stderr: f.std_errors[1] * 1e6,
            d_mm_stderr: f.std_errors[2] * 1e3,
            chi_square: f.chi_square,
            dof: f.dof,
            iterations: f.iterations,
        }
    }
}

#[derive(Serialize)]
struct TransportReport {
    n_launched: usize,
    n_crossed: usize,
    n_accepted: usize,
    mean_arrival_s: Option<f64>,
    std_arrival_s: Option<f64>,
    fit: Option<FitReport>,
    fit_error: Option<String>,
}

/// Arrival histogram of single atoms as a per-launch distribution.
fn histogram_distribution(r: &TransportResult) -> ReconstructedDistribution {
    let m = r.n_launched as f64;
    let h = &r.histogram;
    let bins = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let t_start = h.start + i as f64 * h.bin_time;
            ReconstructedBin {
                t_start,
                t_end: t_start + h.bin_time,
                measured: c,
                measured_fraction: c as f64 / m,
                mean_atoms: c as f64 / m,
                std_error: (c.max(1) as f64).sqrt() / m,
            }
        })
        .collect();
    ReconstructedDistribution { sequences: r.n_launched as u64, bin_time: h.bin_time, bins }
}

fn transport(cfg: &RunConfig) -> CliResult<TransportResult> {
    Ok(run_transport(
        &cfg.ensemble(cfg.rng_seed),
        &cfg.push_above(),
        &cfg.mode_geometry(),
        cfg.system_params().gamma,
        &PhysicalConstants::default(),
    )?)
}

fn run_transport_mode(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<()> {
    let r = transport(cfg)?;
    let mut ev = CsvTable::new(&["t_arr_s", "x_m", "y_m", "vz_m_per_s", "trajectory_id"]);
    for e in &r.events {
        ev.row(vec![
            num(e.t_arr),
            num(e.transverse_offset[0]),
            num(e.transverse_offset[1]),
            num(e.v_at_crossing),
            e.trajectory_id.to_string(),
        ]);
    }
    out.write_csv("arrivals.csv", &ev)?;
    let mut h = CsvTable::new(&["bin_center_s", "count"]).meta("bin_time_s", num(r.histogram.bin_time));
    for (i, c) in r.histogram.counts.iter().enumerate() {
        h.row(vec![num(r.histogram.bin_center(i)), c.to_string()]);
    }
    out.write_csv("histogram.csv", &h)?;

    // a pushed ensemble need not follow the free-fall model; report, don't fail
    let (fit, fit_error) = if r.events.is_empty() {
        (None, Some("no arrivals".to_string()))
    } else {
        match fit_arrival(&histogram_distribution(&r), &PhysicalConstants::default(), &cfg.fit_initial()) {
            Ok(f) => (Some(FitReport::from(&f)), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    out.write_json(
        "transport_report.json",
        &TransportReport {
            n_launched: r.n_launched,
            n_crossed: r.n_crossed,
            n_accepted: r.events.len(),
            mean_arrival_s: r.mean_arrival,
            std_arrival_s: r.std_arrival,
            fit,
            fit_error,
        },
    )
}

fn simulate_transits(cfg: &RunConfig, n: usize, seed: u64, push_s: f64) -> CliResult<Vec<TransitResult>> {
    let p = cfg.system_params();
    let mut sde = cfg.sde(seed);
    sde.push.s0 = push_s;
    let tables = TablePair::build(&p, &sde.grid, push_s)?;
    Ok(run_transit_ensemble(n, &sde, &tables, &p, &cfg.mode_geometry(), &PhysicalConstants::default())?)
}

#[derive(Serialize)]
struct TrajectoryReport {
    n_transits: usize,
    triggered: usize,
    double_crossings: usize,
    double_dips: usize,
    dip_level_photons: f64,
    averaged_used: usize,
    averaged_fwhm_s: Option<f64>,
    dip_area_before_s: Option<f64>,
    dip_area_after_s: Option<f64>,
}

/// Photon number at the count threshold for the configured bare level.
fn dip_level(cfg: &RunConfig) -> f64 {
    let c = cfg.bare_counts_per_bin();
    let eta = cfg.trajectory.conversion_eta * cfg.trajectory.count_bin_us * 1e-6 / REFERENCE_COUNT_BIN;
    ThresholdModel::from_peak(c, c.sqrt(), eta).threshold_counts() / eta
}

fn run_trajectory(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<()> {
    let results = simulate_transits(cfg, cfg.trajectory.n_transits, cfg.rng_seed, cfg.trajectory.push_below_s)?;
    let sde = cfg.sde(cfg.rng_seed);
    let level = dip_level(cfg);
    let smoothing = ((10e-6 / sde.record_interval).round() as usize).max(1);

    if cfg.trajectory.write_trajectories {
        let mut t = CsvTable::new(&[
            "transit_id", "t_s", "x_m", "y_m", "z_m", "vx_m_per_s", "vy_m_per_s", "vz_m_per_s",
        ]);
        for r in &results {
            for s in &r.trajectory {
                t.row(vec![
                    r.id.to_string(),
                    num(s.t),
                    num(s.pos.x),
                    num(s.pos.y),
                    num(s.pos.z),
                    num(s.vel.x),
                    num(s.vel.y),
                    num(s.vel.z),
                ]);
            }
        }
        out.write_csv("trajectories.csv", &t)?;
    }

    let mut trace = CsvTable::new(&["transit_id", "t_s", "n_mean"]);
    let mut counts = CsvTable::new(&["sequence_id", "bin_index", "t_s", "counts"])
        .meta("bin_time_s", num(sde.count_bin))
        .meta("conversion_eta", num(sde.conversion_eta));
    let mut summary = CsvTable::new(&["transit_id", "push_on_time_s", "plane_crossings", "dips", "exit"]);
    for r in &results {
        for p in &r.trace.points {
            trace.row(vec![r.id.to_string(), num(p.t), num(p.n_mean)]);
        }
        let mut rr = rng::stream(cfg.rng_seed, STREAM_COUNTS + r.id);
        let c = synthesize_counts(&r.trace, sde.conversion_eta, sde.count_bin, &mut rr)?;
        for (i, p) in c.points.iter().enumerate() {
            counts.row(vec![r.id.to_string(), i.to_string(), num(p.t), p.counts.unwrap_or(0).to_string()]);
        }
        summary.row(vec![
            r.id.to_string(),
            r.push_on_time.map(num).unwrap_or_default(),
            r.plane_crossings.to_string(),
            r.trace.count_dips(level, smoothing).to_string(),
            format!("{:?}", r.exit),
        ]);
    }
    out.write_csv("trace.csv", &trace)?;
    out.write_csv("counts.csv", &counts)?;
    out.write_csv("transits.csv", &summary)?;

    let traces: Vec<_> = results.iter().map(|r| r.trace.clone()).collect();
    let bare = cfg.system.empty_cavity_photons;
    let count_window = ((sde.count_bin / sde.record_interval).round() as usize).max(1);
    let avg = average_transits(&traces, level, count_window).ok();
    if let Some(a) = &avg {
        let mut t = CsvTable::new(&["t_rel_s", "n_mean"]);
        for (x, y) in a.t.iter().zip(&a.n_mean) {
            t.row(vec![num(*x), num(*y)]);
        }
        out.write_csv("averaged_trace.csv", &t)?;
    }
    let half = 2.0 * cfg.mode_geometry().w0 / sde.entry_vz.abs().max(1e-3);
    let areas = avg.as_ref().map(|a| a.half_areas(bare, half));
    out.write_json(
        "trajectory_report.json",
        &TrajectoryReport {
            n_transits: results.len(),
            triggered: results.iter().filter(|r| r.push_on_time.is_some()).count(),
            double_crossings: results.iter().filter(|r| r.plane_crossings >= 2).count(),
            double_dips: results
                .iter()
                .filter(|r| r.plane_crossings >= 2 && r.trace.count_dips(level, smoothing) >= 2)
                .count(),
            dip_level_photons: level,
            averaged_used: avg.as_ref().map_or(0, |a| a.used),
            averaged_fwhm_s: avg.as_ref().and_then(|a| a.fwhm(bare)),
            dip_area_before_s: areas.map(|a| a.0),
            dip_area_after_s: areas.map(|a| a.1),
        },
    )
}

/// Count streams read from CSV, with the bin time and conversion factor.
pub struct CountInput {
    pub streams: Vec<CountStream>,
    pub bin_time: f64,
    pub conversion_eta: f64,
}

/// Reads `sequence_id,bin_index,counts` (extra columns ignored; `transit_id`
/// is accepted for `sequence_id`). `# bin_time_s = ...` and
/// `# conversion_eta = ...` header lines override the config values.
pub fn read_count_csv(path: &Path, default_bin: f64, default_eta: f64) -> CliResult<CountInput> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read input {}: {e}", path.display())))?;
    let bad = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let mut bin_time = default_bin;
    let mut eta = default_eta;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').split_once('=') {
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("bad metadata value in `{line}`")))?;
            match k.trim() {
                "bin_time_s" => bin_time = v,
                "conversion_eta" => eta = v,
                _ => {}
            }
        }
    }
    if !(bin_time > 0.0 && eta > 0.0) {
        return Err(bad("bin_time_s and conversion_eta must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let seq_col = col(&["sequence_id", "transit_id"]).ok_or_else(|| bad("missing sequence_id column".into()))?;
    let count_col = col(&["counts"]).ok_or_else(|| bad("missing counts column".into()))?;
    let bin_col = col(&["bin_index"]);
    let mut per_seq: std::collections::BTreeMap<u64, Vec<(u64, u64)>> = Default::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize, what: &str| -> CliResult<u64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("data row {}: bad {what}", row + 1)))
        };
        let seq = field(seq_col, "sequence_id")?;
        let c = field(count_col, "counts")?;
        let entry = per_seq.entry(seq).or_default();
        let bin = match bin_col {
            Some(i) => field(i, "bin_index")?,
            None => entry.len() as u64,
        };
        entry.push((bin, c));
    }
    if per_seq.is_empty() {
        return Err(bad("no count rows".into()));
    }
    let streams = per_seq
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_unstable();
            let n = v.last().map_or(0, |x| x.0 as usize + 1);
            let mut counts = vec![0u64; n];
            for (b, c) in v {
                counts[b as usize] = c;
            }
            CountStream { sequence_id: id, bin_time, start: 0.0, counts }
        })
        .collect();
    Ok(CountInput { streams, bin_time, conversion_eta: eta })
}

#[derive(Serialize)]
struct ThresholdReport {
    c_bar: f64,
    sigma: f64,
    threshold_counts: f64,
    n_th: f64,
    conversion_eta: f64,
    eta_over: f64,
    eta_miss: f64,
    non_poissonian: bool,
}

#[derive(Serialize)]
pub struct AnalysisSummary {
    pub sequences: usize,
    pub events: usize,
    pub threshold_counts: f64,
    pub reconstructed_atoms_per_sequence: f64,
    #[serde(rename = "fit_T_uK")]
    pub fit_t_uk: f64,
    pub fit_d_mm: f64,
    pub g2_zero: Option<f64>,
}

/// Threshold -> dips -> reconstruction -> fit -> g2, writing each stage.
fn analyze_streams(
    cfg: &RunConfig,
    input: &CountInput,
    seed: u64,
    out: &mut OutputDir,
) -> CliResult<(AnalysisSummary, Vec<OnOffRecord>)> {
    let a = &cfg.analysis;
    let hist = count_histogram(input.streams.iter().flat_map(|s| s.counts.iter().copied()));
    // conversion per reference bin -> per actual bin for n_th
    let eta_bin = input.conversion_eta * input.bin_time / REFERENCE_COUNT_BIN;
    let model = fit_threshold(&hist, eta_bin)?;
    out.write_json(
        "threshold.json",
        &ThresholdReport {
            c_bar: model.c_bar,
            sigma: model.sigma,
            threshold_counts: model.threshold_counts(),
            n_th: model.n_th,
            conversion_eta: input.conversion_eta,
            eta_over: model.eta_over,
            eta_miss: model.eta_miss,
            non_poissonian: model.non_poissonian,
        },
    )?;

    let dead = a.dead_time_us * 1e-6;
    let records: Vec<OnOffRecord> = input.streams.iter().map(|s| detect_dips(s, &model, dead)).collect();
    let mut ev = CsvTable::new(&["sequence_id", "t_s", "bin_index", "min_count"]);
    for r in &records {
        for e in &r.events {
            ev.row(vec![r.sequence_id.to_string(), num(e.time), e.bin_index.to_string(), e.min_count.to_string()]);
        }
    }
    let n_events = ev.len();
    out.write_csv("events.csv", &ev)?;

    let window = a.sequence_window_ms * 1e-3;
    let recon = reconstruct_poisson(&records, 0.0, window, a.arrival_bin_us * 1e-6)?;
    let mut rt = CsvTable::new(&[
        "t_start_s", "t_end_s", "measured", "measured_fraction", "mean_atoms", "std_error",
    ])
    .meta("sequences", recon.sequences);
    for b in &recon.bins {
        rt.row(vec![
            num(b.t_start),
            num(b.t_end),
            b.measured.to_string(),
            num(b.measured_fraction),
            num(b.mean_atoms),
            num(b.std_error),
        ]);
    }
    out.write_csv("reconstruction.csv", &rt)?;

    let fit = fit_arrival(&recon, &PhysicalConstants::default(), &cfg.fit_initial())?;
    out.write_json("fit.json", &FitReport::from(&fit))?;

    let g2 = g2_correlation(
        &records,
        a.g2_include_reconstructed.then_some(&recon),
        &cfg.g2_options(),
        &mut rng::stream(seed, STREAM_G2),
    )?;
    let mut gt = CsvTable::new(&["tau_s", "g2", "stderr", "pairs"]);
    for p in &g2 {
        gt.row(vec![num(p.tau), num(p.g2), num(p.stderr), p.pairs.to_string()]);
    }
    out.write_csv("g2.csv", &gt)?;

    Ok((
        AnalysisSummary {
            sequences: records.len(),
            events: n_events,
            threshold_counts: model.threshold_counts(),
            reconstructed_atoms_per_sequence: recon.total_mean_atoms(),
            fit_t_uk: fit.params.temperature * 1e6,
            fit_d_mm: fit.params.d * 1e3,
            g2_zero: g2.first().map(|p| p.g2),
        },
        records,
    ))
}

fn run_analyze(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<()> {
    let path = cfg
        .analysis
        .input
        .as_ref()
        .ok_or_else(|| CliError::Validation("analyze needs `analysis.input` (a count-stream CSV)".into()))?;
    let input = read_count_csv(path, cfg.trajectory.count_bin_us * 1e-6, cfg.trajectory.conversion_eta)?;
    let (summary, _) = analyze_streams(cfg, &input, cfg.rng_seed, out)?;
    out.write_json("analysis_report.json", &summary)
}

#[derive(Serialize)]
struct PipelineReport {
    arrival_pool: usize,
    transit_pool: usize,
    transit_pool_with_dip: usize,
    true_atoms: usize,
    true_atoms_per_sequence: f64,
    true_mean_arrival_s: Option<f64>,
    /// True arrivals with a detected event within one dead time.
    detected_fraction: Option<f64>,
    analysis: AnalysisSummary,
}

fn run_reference_pipeline(cfg: &RunConfig, out: &mut OutputDir) -> CliResult<()> {
    let seed = cfg.rng_seed;
    let window = cfg.analysis.sequence_window_ms * 1e-3;

    // arrival times of single atoms at the cavity plane
    let tr = transport(cfg)?;
    let pool: Vec<f64> = tr.events.iter().map(|e| e.t_arr).filter(|&t| t < window).collect();
    if pool.is_empty() {
        return Err(CliError::Validation("transport produced no arrivals inside the sequence window".into()));
    }

    // dip shapes: free-fall transits through the mode, aligned on their minimum
    let sde = cfg.sde(seed);
    let transits = simulate_transits(cfg, cfg.pipeline.transit_pool, seed.wrapping_add(1), 0.0)?;
    let smoothing = ((10e-6 / sde.record_interval).round() as usize).max(1);
    let shapes: Vec<(usize, &TransitResult)> =
        transits.iter().filter_map(|r| r.trace.smoothed_min(smoothing).map(|(i, _)| (i, r))).collect();
    if shapes.is_empty() {
        return Err(CliError::Validation("no transit produced a trace".into()));
    }

    let bare = cfg.system.empty_cavity_photons;
    let bin = sde.count_bin;
    let n_bins = (window / bin).round() as usize;
    let scale = sde.conversion_eta * bin / REFERENCE_COUNT_BIN;
    let mut truth = CsvTable::new(&["sequence_id", "t_arr_s", "transit_id"]);
    let mut counts = CsvTable::new(&["sequence_id", "bin_index", "t_s", "counts"])
        .meta("bin_time_s", num(bin))
        .meta("conversion_eta", num(sde.conversion_eta));
    let mut streams = Vec::with_capacity(cfg.pipeline.n_sequences);
    let mut true_times: Vec<Vec<f64>> = Vec::with_capacity(cfg.pipeline.n_sequences);
    let per_seq = Poisson::new(cfg.pipeline.atoms_per_sequence).map_err(|e| CliError::Validation(e.to_string()))?;
    for s in 0..cfg.pipeline.n_sequences as u64 {
        let mut r = rng::stream(seed, STREAM_SEQUENCES + s);
        let n_atoms = per_seq.sample(&mut r) as usize;
        let mut n = vec![bare; n_bins];
        let mut times = Vec::with_capacity(n_atoms);
        for _ in 0..n_atoms {
            let t_arr = pool[r.random_range(0..pool.len())];
            let (imin, tr) = shapes[r.random_range(0..shapes.len())];
            truth.row(vec![s.to_string(), num(t_arr), tr.id.to_string()]);
            times.push(t_arr);
            let t_min = tr.trace.points[imin].t;
            let w = tr.trace.interval / bin;
            for p in &tr.trace.points {
                let t = t_arr + p.t - t_min;
                if t >= 0.0 {
                    let k = (t / bin) as usize;
                    if k < n_bins {
                        n[k] += (p.n_mean - bare) * w;
                    }
                }
            }
        }
        let c: Vec<u64> = n
            .iter()
            .map(|&x| {
                let mean = scale * x.max(0.0);
                if mean > 0.0 {
                    Poisson::new(mean).map(|d| d.sample(&mut r) as u64).unwrap_or(0)
                } else {
                    0
                }
            })
            .collect();
        for (i, v) in c.iter().enumerate() {
            counts.row(vec![s.to_string(), i.to_string(), num(i as f64 * bin), v.to_string()]);
        }
        streams.push(CountStream { sequence_id: s, bin_time: bin, start: 0.0, counts: c });
        true_times.push(times);
    }
    out.write_csv("true_arrivals.csv", &truth)?;
    out.write_csv("counts.csv", &counts)?;

    let input = CountInput { streams, bin_time: bin, conversion_eta: sde.conversion_eta };
    let (analysis, records) = analyze_streams(cfg, &input, seed, out)?;

    let dead = (cfg.analysis.dead_time_us * 1e-6).max(bin);
    let all: Vec<f64> = true_times.iter().flatten().copied().collect();
    let hits: usize = true_times
        .iter()
        .zip(&records)
        .map(|(ts, rec)| ts.iter().filter(|&&t| rec.has_event_in(t - dead, t + dead)).count())
        .sum();
    out.write_json(
        "pipeline_report.json",
        &PipelineReport {
            arrival_pool: pool.len(),
            transit_pool: transits.len(),
            transit_pool_with_dip: shapes.len(),
            true_atoms: all.len(),
            true_atoms_per_sequence: all.len() as f64 / cfg.pipeline.n_sequences as f64,
            true_mean_arrival_s: pushsim::transport::mean_std(&all).map(|m| m.0),
            detected_fraction: (!all.is_empty()).then(|| hits as f64 / all.len() as f64),
            analysis,
        },
    )
}
