//! Run configuration. Keys carry their unit in the name; every section is
//! optional and falls back to the defaults below.

// field names are the config keys, units included (g0_over_2pi_MHz, ...)
#![allow(non_snake_case)]

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pushsim::constants::{angular_to_mhz, mhz_to_angular};
use pushsim::sde::{SdeConfig, SdeTerms, TableGrid, TriggerMode};
use pushsim::stats::{ArrivalModelParams, G2Options};
use pushsim::transport::EnsembleConfig;
use pushsim::{ModeGeometry, PushBeamParams, PushDirection, SystemParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    Transport,
    Trajectory,
    Analyze,
    ReferencePipeline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Transport => "transport",
            Mode::Trajectory => "trajectory",
            Mode::Analyze => "analyze",
            Mode::ReferencePipeline => "reference-pipeline",
        }
    }
}

pub const SECTIONS: [&str; 8] =
    ["system", "geometry", "push", "spectrum", "transport", "trajectory", "analysis", "pipeline"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub push: PushSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

fn default_seed() -> u64 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            rng_seed: default_seed(),
            output_dir: None,
            system: SystemSection::default(),
            geometry: GeometrySection::default(),
            push: PushSection::default(),
            spectrum: SpectrumSection::default(),
            transport: TransportSection::default(),
            trajectory: TrajectorySection::default(),
            analysis: AnalysisSection::default(),
            pipeline: PipelineSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub g0_over_2pi_MHz: f64,
    pub kappa_over_2pi_MHz: f64,
    pub gamma_over_2pi_MHz: f64,
    pub delta_ap_over_2pi_MHz: f64,
    pub delta_cp_over_2pi_MHz: f64,
    pub delta_st_max_over_2pi_MHz: f64,
    /// Probe strength as the empty resonant cavity photon number.
    pub empty_cavity_photons: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        SystemSection {
            g0_over_2pi_MHz: angular_to_mhz(p.g0),
            kappa_over_2pi_MHz: angular_to_mhz(p.kappa),
            gamma_over_2pi_MHz: angular_to_mhz(p.gamma),
            delta_ap_over_2pi_MHz: 0.0,
            delta_cp_over_2pi_MHz: 0.0,
            delta_st_max_over_2pi_MHz: angular_to_mhz(p.delta_st_max),
            empty_cavity_photons: 0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub w0_um: f64,
    pub cavity_length_um: f64,
    pub d_mm: f64,
    pub lambda_lock_nm: f64,
    pub w_lock_um: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = ModeGeometry::default();
        GeometrySection {
            w0_um: g.w0 * 1e6,
            cavity_length_um: g.cavity_length * 1e6,
            d_mm: g.d * 1e3,
            lambda_lock_nm: g.lambda_lock * 1e9,
            w_lock_um: g.w_lock * 1e6,
        }
    }
}

/// Push beam from above, used by transport and the pipeline's arrival pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushSection {
    pub s0: f64,
    pub delta_aps_over_2pi_MHz: f64,
    pub waist_um: f64,
    pub axis_offset_um: [f64; 2],
}

impl Default for PushSection {
    fn default() -> Self {
        let p = PushBeamParams::from_above(0.0, 0.0);
        PushSection { s0: 0.0, delta_aps_over_2pi_MHz: 0.0, waist_um: p.waist * 1e6, axis_offset_um: [0.0; 2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub scan_min_MHz: f64,
    pub scan_max_MHz: f64,
    pub n_points: usize,
    pub fock_cutoff: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { scan_min_MHz: -40.0, scan_max_MHz: 40.0, n_points: 401, fock_cutoff: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportSection {
    pub n_atoms: usize,
    pub temperature_uK: f64,
    pub release_time_ms: f64,
    pub source_sigma_um: [f64; 3],
    pub dt_us: f64,
    pub recoil: bool,
    pub max_time_ms: f64,
    pub bin_time_us: f64,
    /// Maximum |y| at the crossing; 0 counts every crossing.
    pub acceptance_half_width_um: f64,
}

impl Default for TransportSection {
    fn default() -> Self {
        let e = EnsembleConfig::default();
        TransportSection {
            n_atoms: e.n_atoms,
            temperature_uK: e.temperature * 1e6,
            release_time_ms: 0.0,
            source_sigma_um: [0.0; 3],
            dt_us: e.dt * 1e6,
            recoil: e.recoil,
            max_time_ms: e.max_time * 1e3,
            bin_time_us: e.bin_time * 1e6,
            acceptance_half_width_um: e.acceptance_half_width.unwrap_or(0.0) * 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub n_transits: usize,
    /// Peak saturation of the push beam from below.
    pub push_below_s: f64,
    pub push_below_waist_um: f64,
    pub dt_us: f64,
    pub t_max_ms: f64,
    pub trigger: TriggerMode,
    /// Counts per unit photon number per 50 us reference bin.
    pub conversion_eta: f64,
    pub count_bin_us: f64,
    pub record_interval_us: f64,
    pub entry_vz_m_per_s: f64,
    pub entry_height_w0: f64,
    pub table_n_coupling: usize,
    pub table_n_stark: usize,
    pub table_n_saturation: usize,
    pub fock_cutoff: usize,
    pub write_trajectories: bool,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        let c = SdeConfig::default();
        TrajectorySection {
            n_transits: 50,
            push_below_s: 1.9,
            push_below_waist_um: PushBeamParams::from_below(0.0).waist * 1e6,
            dt_us: c.dt * 1e6,
            t_max_ms: c.t_max * 1e3,
            trigger: c.trigger,
            conversion_eta: c.conversion_eta,
            count_bin_us: c.count_bin * 1e6,
            record_interval_us: c.record_interval * 1e6,
            entry_vz_m_per_s: c.entry_vz,
            entry_height_w0: c.entry_height_w0,
            table_n_coupling: c.grid.n_coupling,
            table_n_stark: c.grid.n_stark,
            table_n_saturation: c.grid.n_saturation,
            fock_cutoff: c.grid.fock_cutoff,
            write_trajectories: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Count-stream CSV for `analyze`; relative paths resolve against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub dead_time_us: f64,
    pub arrival_bin_us: f64,
    pub sequence_window_ms: f64,
    pub g2_tau_bin_ms: f64,
    pub g2_tau_max_ms: f64,
    /// Add the atoms hidden in multi-atom bins back before the g2 estimate.
    pub g2_include_reconstructed: bool,
    pub fit_initial_T_uK: f64,
    pub fit_initial_d_mm: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let g = G2Options::default();
        AnalysisSection {
            input: None,
            dead_time_us: pushsim::stats::DEFAULT_DEAD_TIME * 1e6,
            arrival_bin_us: pushsim::stats::DEFAULT_ARRIVAL_BIN * 1e6,
            sequence_window_ms: pushsim::stats::DEFAULT_SEQUENCE_WINDOW * 1e3,
            g2_tau_bin_ms: g.tau_bin * 1e3,
            g2_tau_max_ms: g.tau_max * 1e3,
            g2_include_reconstructed: true,
            fit_initial_T_uK: 60.0,
            fit_initial_d_mm: 4.0,
        }
    }
}

/// Synthetic experiment for `reference-pipeline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub n_sequences: usize,
    /// Mean number of cavity transits per sequence.
    pub atoms_per_sequence: f64,
    /// Free-fall transits simulated once and reused as dip shapes.
    pub transit_pool: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection { n_sequences: 1000, atoms_per_sequence: 1.0, transit_pool: 40 }
    }
}

fn positive(v: f64, key: &str) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("`{key}` must be positive, got {v}")))
    }
}

fn non_negative(v: f64, key: &str) -> CliResult<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("`{key}` must be >= 0, got {v}")))
    }
}

fn finite(v: f64, key: &str) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("`{key}` must be finite, got {v}")))
    }
}

fn at_least(v: usize, min: usize, key: &str) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Validation(format!("`{key}` must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let s = &self.system;
        positive(s.g0_over_2pi_MHz, "system.g0_over_2pi_MHz")?;
        positive(s.kappa_over_2pi_MHz, "system.kappa_over_2pi_MHz")?;
        positive(s.gamma_over_2pi_MHz, "system.gamma_over_2pi_MHz")?;
        finite(s.delta_ap_over_2pi_MHz, "system.delta_ap_over_2pi_MHz")?;
        finite(s.delta_cp_over_2pi_MHz, "system.delta_cp_over_2pi_MHz")?;
        finite(s.delta_st_max_over_2pi_MHz, "system.delta_st_max_over_2pi_MHz")?;
        non_negative(s.empty_cavity_photons, "system.empty_cavity_photons")?;

        let g = &self.geometry;
        positive(g.w0_um, "geometry.w0_um")?;
        positive(g.cavity_length_um, "geometry.cavity_length_um")?;
        positive(g.d_mm, "geometry.d_mm")?;
        positive(g.lambda_lock_nm, "geometry.lambda_lock_nm")?;
        positive(g.w_lock_um, "geometry.w_lock_um")?;

        let p = &self.push;
        non_negative(p.s0, "push.s0")?;
        finite(p.delta_aps_over_2pi_MHz, "push.delta_aps_over_2pi_MHz")?;
        positive(p.waist_um, "push.waist_um")?;
        for v in p.axis_offset_um {
            finite(v, "push.axis_offset_um")?;
        }

        let sp = &self.spectrum;
        finite(sp.scan_min_MHz, "spectrum.scan_min_MHz")?;
        finite(sp.scan_max_MHz, "spectrum.scan_max_MHz")?;
        if sp.scan_max_MHz <= sp.scan_min_MHz {
            return Err(CliError::Validation("`spectrum.scan_max_MHz` must exceed `spectrum.scan_min_MHz`".into()));
        }
        at_least(sp.n_points, 2, "spectrum.n_points")?;
        at_least(sp.fock_cutoff, 2, "spectrum.fock_cutoff")?;

        let t = &self.transport;
        at_least(t.n_atoms, 1, "transport.n_atoms")?;
        positive(t.temperature_uK, "transport.temperature_uK")?;
        non_negative(t.release_time_ms, "transport.release_time_ms")?;
        for v in t.source_sigma_um {
            non_negative(v, "transport.source_sigma_um")?;
        }
        positive(t.dt_us, "transport.dt_us")?;
        positive(t.max_time_ms, "transport.max_time_ms")?;
        positive(t.bin_time_us, "transport.bin_time_us")?;
        non_negative(t.acceptance_half_width_um, "transport.acceptance_half_width_um")?;

        let tr = &self.trajectory;
        at_least(tr.n_transits, 1, "trajectory.n_transits")?;
        non_negative(tr.push_below_s, "trajectory.push_below_s")?;
        positive(tr.push_below_waist_um, "trajectory.push_below_waist_um")?;
        positive(tr.dt_us, "trajectory.dt_us")?;
        positive(tr.t_max_ms, "trajectory.t_max_ms")?;
        positive(tr.conversion_eta, "trajectory.conversion_eta")?;
        positive(tr.count_bin_us, "trajectory.count_bin_us")?;
        positive(tr.record_interval_us, "trajectory.record_interval_us")?;
        finite(tr.entry_vz_m_per_s, "trajectory.entry_vz_m_per_s")?;
        positive(tr.entry_height_w0, "trajectory.entry_height_w0")?;
        at_least(tr.table_n_coupling, 2, "trajectory.table_n_coupling")?;
        at_least(tr.table_n_stark, 2, "trajectory.table_n_stark")?;
        at_least(tr.table_n_saturation, 2, "trajectory.table_n_saturation")?;
        at_least(tr.fock_cutoff, 2, "trajectory.fock_cutoff")?;

        let a = &self.analysis;
        non_negative(a.dead_time_us, "analysis.dead_time_us")?;
        positive(a.arrival_bin_us, "analysis.arrival_bin_us")?;
        positive(a.sequence_window_ms, "analysis.sequence_window_ms")?;
        positive(a.g2_tau_bin_ms, "analysis.g2_tau_bin_ms")?;
        positive(a.g2_tau_max_ms, "analysis.g2_tau_max_ms")?;
        positive(a.fit_initial_T_uK, "analysis.fit_initial_T_uK")?;
        positive(a.fit_initial_d_mm, "analysis.fit_initial_d_mm")?;

        let pl = &self.pipeline;
        at_least(pl.n_sequences, 1, "pipeline.n_sequences")?;
        positive(pl.atoms_per_sequence, "pipeline.atoms_per_sequence")?;
        at_least(pl.transit_pool, 1, "pipeline.transit_pool")?;

        // backstop: the library's own parameter checks
        self.system_params().validate()?;
        self.mode_geometry().validate()?;
        self.push_above().validate()?;
        self.ensemble(self.rng_seed).validate()?;
        self.sde(self.rng_seed).validate()?;
        self.g2_options().validate()?;
        Ok(())
    }

    pub fn system_params(&self) -> SystemParams {
        let s = &self.system;
        let p = SystemParams {
            g0: mhz_to_angular(s.g0_over_2pi_MHz),
            kappa: mhz_to_angular(s.kappa_over_2pi_MHz),
            gamma: mhz_to_angular(s.gamma_over_2pi_MHz),
            delta_ap: mhz_to_angular(s.delta_ap_over_2pi_MHz),
            delta_cp: mhz_to_angular(s.delta_cp_over_2pi_MHz),
            delta_st_max: mhz_to_angular(s.delta_st_max_over_2pi_MHz),
            eta_drive: 0.0,
        };
        let eta = p.drive_for_empty_cavity_photons(s.empty_cavity_photons);
        p.with_drive(eta)
    }

    pub fn mode_geometry(&self) -> ModeGeometry {
        let g = &self.geometry;
        ModeGeometry {
            w0: g.w0_um / 1e6,
            cavity_length: g.cavity_length_um / 1e6,
            d: g.d_mm / 1e3,
            lambda_lock: g.lambda_lock_nm / 1e9,
            w_lock: g.w_lock_um / 1e6,
        }
    }

    pub fn push_above(&self) -> PushBeamParams {
        let p = &self.push;
        PushBeamParams {
            waist: p.waist_um / 1e6,
            axis_offset: [p.axis_offset_um[0] / 1e6, p.axis_offset_um[1] / 1e6],
            direction: PushDirection::FromAbove,
            ..PushBeamParams::from_above(p.s0, mhz_to_angular(p.delta_aps_over_2pi_MHz))
        }
    }

    pub fn ensemble(&self, seed: u64) -> EnsembleConfig {
        let t = &self.transport;
        EnsembleConfig {
            n_atoms: t.n_atoms,
            temperature: t.temperature_uK / 1e6,
            release_time: t.release_time_ms / 1e3,
            source_position: [0.0; 3],
            source_sigma: t.source_sigma_um.map(|v| v / 1e6),
            dt: t.dt_us / 1e6,
            rng_seed: seed,
            recoil: t.recoil,
            max_time: t.max_time_ms / 1e3,
            bin_time: t.bin_time_us / 1e6,
            acceptance_half_width: (t.acceptance_half_width_um > 0.0).then_some(t.acceptance_half_width_um / 1e6),
        }
    }

    pub fn sde(&self, seed: u64) -> SdeConfig {
        let t = &self.trajectory;
        SdeConfig {
            dt: t.dt_us / 1e6,
            t_max: t.t_max_ms / 1e3,
            push: PushBeamParams { waist: t.push_below_waist_um / 1e6, ..PushBeamParams::from_below(t.push_below_s) },
            grid: TableGrid {
                n_coupling: t.table_n_coupling,
                n_stark: t.table_n_stark,
                n_saturation: t.table_n_saturation,
                fock_cutoff: t.fock_cutoff,
            },
            rng_seed: seed,
            trigger: t.trigger,
            conversion_eta: t.conversion_eta,
            count_bin: t.count_bin_us / 1e6,
            record_interval: t.record_interval_us / 1e6,
            entry_vz: t.entry_vz_m_per_s,
            entry_height_w0: t.entry_height_w0,
            terms: SdeTerms::default(),
        }
    }

    pub fn g2_options(&self) -> G2Options {
        let a = &self.analysis;
        G2Options {
            tau_bin: a.g2_tau_bin_ms / 1e3,
            tau_max: a.g2_tau_max_ms / 1e3,
            sequence_period: a.sequence_window_ms / 1e3,
        }
    }

    pub fn fit_initial(&self) -> ArrivalModelParams {
        ArrivalModelParams::normalized(self.analysis.fit_initial_T_uK / 1e6, self.analysis.fit_initial_d_mm / 1e3)
    }

    /// Bare-cavity counts per count bin implied by the trajectory settings.
    pub fn bare_counts_per_bin(&self) -> f64 {
        let t = &self.trajectory;
        t.conversion_eta * self.system.empty_cavity_photons * t.count_bin_us / 1e6 / pushsim::sde::REFERENCE_COUNT_BIN
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A loaded configuration plus the sections that were not present and
/// therefore took their defaults.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub defaulted_sections: Vec<String>,
    pub source: Option<PathBuf>,
}

/// Parses `text`, applies `key=value` overrides (dotted keys, TOML values;
/// bare words are taken as strings) and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> CliResult<LoadedConfig> {
    // typed parse first so errors carry line and column
    toml::from_str::<RunConfig>(text).map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let defaulted_sections = SECTIONS.iter().filter(|s| !table.contains_key(**s)).map(|s| s.to_string()).collect();
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(format!("after overrides: {}", e.message())))?;
    config.validate()?;
    Ok(LoadedConfig { config, defaulted_sections, source: None })
}

pub fn load_config(path: &Path, overrides: &[String]) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut loaded = parse_config(&text, overrides)
        .map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })?;
    if let Some(input) = loaded.config.analysis.input.as_mut() {
        if input.is_relative() {
            if let Some(dir) = path.parent() {
                *input = dir.join(&*input);
            }
        }
    }
    loaded.source = Some(path.to_path_buf());
    Ok(loaded)
}

fn apply_override(table: &mut toml::Table, ov: &str) -> CliResult<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{ov}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Validation(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("override `{key}`: `{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_setup() {
        let c = parse_config("", &[]).unwrap();
        let p = c.config.system_params();
        assert!((angular_to_mhz(p.g0) - 16.02).abs() < 1e-12);
        assert!((angular_to_mhz(p.kappa) - 18.6).abs() < 1e-12);
        assert!((angular_to_mhz(p.gamma) - 3.033).abs() < 1e-12);
        let g = c.config.mode_geometry();
        assert!((g.w0 - 26.198e-6).abs() < 1e-15);
        assert!((g.d - 4.80e-3).abs() < 1e-15);
        assert_eq!(c.defaulted_sections.len(), SECTIONS.len());
    }

    #[test]
    fn negative_kappa_is_rejected_by_name() {
        let e = parse_config("[system]\nkappa_over_2pi_MHz = -1.0\n", &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("kappa_over_2pi_MHz"), "{e}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("rng_seed = 3\n\n[system]\nkappa_MHz = 1.0\n", &[]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("kappa_MHz"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse_config("[system]\ng0_over_2pi_MHz = = 3\n", &[]).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn overrides_set_nested_keys() {
        let c = parse_config(
            "[push]\ns0 = 0.001\n",
            &["push.delta_aps_over_2pi_MHz=-10".into(), "trajectory.trigger=noise-free".into(), "rng_seed=9".into()],
        )
        .unwrap();
        assert_eq!(c.config.push.delta_aps_over_2pi_MHz, -10.0);
        assert_eq!(c.config.trajectory.trigger, TriggerMode::NoiseFree);
        assert_eq!(c.config.rng_seed, 9);
        assert!(!c.defaulted_sections.contains(&"push".to_string()));
        assert!(!c.defaulted_sections.contains(&"trajectory".to_string()));
        assert!(c.defaulted_sections.contains(&"analysis".to_string()));
    }

    #[test]
    fn unknown_override_is_rejected() {
        let e = parse_config("", &["system.bogus=1".into()]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert!(parse_config("", &["no_equals".into()]).is_err());
    }

    #[test]
    fn serialization_round_trip_is_idempotent() {
        let c = parse_config("[transport]\nn_atoms = 123\n[analysis]\ninput = \"x.csv\"\n", &[]).unwrap().config;
        let once = c.to_toml();
        let again = parse_config(&once, &[]).unwrap().config;
        assert_eq!(c, again);
        assert_eq!(once, again.to_toml());
    }

    #[test]
    fn acceptance_zero_means_every_crossing() {
        let c = parse_config("[transport]\nacceptance_half_width_um = 0\n", &[]).unwrap().config;
        assert_eq!(c.ensemble(1).acceptance_half_width, None);
        let d = RunConfig::default().ensemble(1);
        assert!((d.acceptance_half_width.unwrap() - 2.0 * 26.198e-6).abs() < 1e-15);
    }
}
