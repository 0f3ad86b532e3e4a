//! Scenario files: flat TOML with the unit spelled out in every key.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::PolarimeterBand;
use crate::error::{NldpError, Result};
use crate::link::{FiberParams, LinkConfig, PmdCalibration};
use crate::polarimeter::PolarimeterSettings;
use crate::ssfm::PropagationSettings;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Comparative,
    DistanceSweep,
    PowerSweep,
    AnalyticOnly,
}

/// Compression applied to dispersion and PMD in the desk-scale defaults. The
/// loading band shrinks by the same factor, so every walk-off and PMD
/// decorrelation product (beta2 * l * M, M * tau_p^2 / beta2, M^2 tau_p^2 L0)
/// keeps its full-band value while the comb fits in a few hundred samples.
pub const DESK_COMPRESSION: f64 = 3333.0;

/// Everything a run needs. Field names carry their units; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub seed: u64,
    pub ensemble_size: usize,
    pub output_dir: PathBuf,
    /// distance sweep points, in loop circulations
    pub circulations: Vec<usize>,
    /// power sweep points relative to p_rep_dbm
    pub power_offsets_db: Vec<f64>,

    // link
    pub n_spans: usize,
    pub spans_per_circulation: usize,
    pub span_length_km: f64,
    pub p_rep_dbm: f64,
    pub probe_power_dbm: f64,
    pub probe_frequency_hz: f64,
    /// loading band edges as offsets from the probe
    pub band_min_offset_hz: f64,
    pub band_max_offset_hz: f64,
    pub kicker_enabled: bool,
    pub repeater_ase_enabled: bool,
    pub noise_figure_db: f64,
    pub repeater_gain_db: Option<f64>,

    // fiber
    pub alpha_db_per_km: f64,
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_per_km: f64,
    pub tau_p_ps_per_sqrt_km: f64,
    pub pmd_calibration: PmdCalibration,

    // comb and integrator
    pub comb_pitch_hz: f64,
    pub samples_per_window: usize,
    pub max_nl_phase_rad: f64,
    pub guard_fraction: f64,
    pub alias_tolerance: f64,
    pub include_antisymmetric_term: bool,
    pub include_coherent_coupling_term: bool,
    /// propagate loading +- probe and keep the odd part (see ssfm)
    pub differential_probe: bool,
    /// clear loading light from the gap at every repeater (differential mode only)
    pub gap_cleaning: bool,

    // polarimeter
    pub sample_period_ns: f64,
    pub adc_bits: u32,
    pub electrical_cutoff_hz: f64,
    pub optical_filter_fwhm_hz: f64,
    /// overrides the OSNR accumulated by the repeaters
    pub osnr_db: Option<f64>,
    pub noise_boost_db: f64,
    /// sampling clock phases taken from each filtered waveform
    pub sampling_phases: usize,
    /// independent receiver-noise draws per propagated field
    pub noise_draws: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ScenarioConfig {
    /// Desk-scale Monte-Carlo defaults.
    pub fn desk() -> Self {
        let s = DESK_COMPRESSION;
        Self {
            mode: Mode::Comparative,
            seed: 1,
            ensemble_size: 32,
            output_dir: PathBuf::from("nldp-out"),
            circulations: vec![1, 3, 5, 10, 20],
            power_offsets_db: vec![0.0, -1.0, -2.0],
            n_spans: 110,
            spans_per_circulation: 11,
            span_length_km: 93.0,
            p_rep_dbm: 3.0,
            probe_power_dbm: -5.2,
            probe_frequency_hz: 193.9e12,
            band_min_offset_hz: 150e6,
            band_max_offset_hz: 450e6,
            kicker_enabled: true,
            repeater_ase_enabled: false,
            noise_figure_db: 5.0,
            repeater_gain_db: None,
            alpha_db_per_km: 0.2,
            beta2_ps2_per_km: -21.7 * s,
            gamma_per_w_per_km: 1.3,
            tau_p_ps_per_sqrt_km: 0.04 * s,
            pmd_calibration: PmdCalibration::SopCorrelation,
            comb_pitch_hz: 3.125e6,
            samples_per_window: 640,
            max_nl_phase_rad: 0.05,
            guard_fraction: 0.8,
            alias_tolerance: 1e-2,
            include_antisymmetric_term: true,
            include_coherent_coupling_term: false,
            differential_probe: true,
            gap_cleaning: true,
            sample_period_ns: 10.0,
            adc_bits: 14,
            electrical_cutoff_hz: 30e6,
            optical_filter_fwhm_hz: 250e6,
            osnr_db: None,
            noise_boost_db: 5.0,
            sampling_phases: 20,
            noise_draws: 4,
        }
    }

    /// Full-band parameters of the field link, for the analytic branch.
    pub fn full_band() -> Self {
        Self {
            mode: Mode::AnalyticOnly,
            p_rep_dbm: 20.9,
            band_min_offset_hz: 50e9,
            band_max_offset_hz: 2.5e12,
            beta2_ps2_per_km: -21.7,
            tau_p_ps_per_sqrt_km: 0.04,
            optical_filter_fwhm_hz: 27e9,
            ..Self::desk()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| NldpError::Config(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NldpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NldpError::Config(m));
        if self.ensemble_size < 1 {
            return bad("ensemble_size must be at least 1".into());
        }
        match self.mode {
            Mode::DistanceSweep if self.circulations.is_empty() => {
                return bad("distance_sweep needs a non-empty circulations list".into())
            }
            Mode::PowerSweep if self.power_offsets_db.is_empty() => {
                return bad("power_sweep needs a non-empty power_offsets_db list".into())
            }
            _ => {}
        }
        if self.circulations.contains(&0) {
            return bad("circulation counts must be positive".into());
        }
        if self.power_offsets_db.iter().any(|o| !o.is_finite()) {
            return bad("power offsets must be finite".into());
        }
        if !(self.band_min_offset_hz > 0.0 && self.band_max_offset_hz > self.band_min_offset_hz) {
            return bad("need 0 < band_min_offset_hz < band_max_offset_hz".into());
        }
        if !(self.comb_pitch_hz > 0.0) || self.band_min_offset_hz < 2.0 * self.comb_pitch_hz {
            return bad("comb pitch must be positive and well below band_min_offset_hz".into());
        }
        if self.mode != Mode::AnalyticOnly {
            let tones = (self.band_max_offset_hz / self.comb_pitch_hz).round() as usize;
            // third-order products of the loading must fold back outside the band
            if self.samples_per_window < 4 * tones {
                return bad(format!(
                    "samples_per_window {} too small for {} tones per side (need at least 4x)",
                    self.samples_per_window, tones
                ));
            }
            let dt = 1.0 / (self.comb_pitch_hz * self.samples_per_window as f64);
            let ratio = self.sample_period_ns * 1e-9 / dt;
            if (ratio - ratio.round()).abs() > 1e-6 * ratio {
                return bad("sample_period_ns must be a whole number of envelope samples".into());
            }
            if self.sampling_phases < 1 || self.sampling_phases > ratio.round() as usize {
                return bad("sampling_phases must lie between 1 and the decimation factor".into());
            }
            if self.noise_draws < 1 {
                return bad("noise_draws must be at least 1".into());
            }
        }
        if self.spans_per_circulation < 1 || self.n_spans < 1 {
            return bad("need at least one span".into());
        }
        self.fiber().validate().map_err(|e| NldpError::Config(e.to_string()))?;
        self.link().validate().map_err(|e| NldpError::Config(e.to_string()))?;
        self.polarimeter(None).validate().map_err(|e| NldpError::Config(e.to_string()))?;
        self.propagation().validate().map_err(|e| NldpError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn fiber(&self) -> FiberParams {
        FiberParams::from_units(
            self.alpha_db_per_km,
            self.beta2_ps2_per_km,
            self.gamma_per_w_per_km,
            self.tau_p_ps_per_sqrt_km,
        )
    }

    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            n_spans: self.n_spans,
            spans_per_circulation: self.spans_per_circulation,
            span_length: self.span_length_km * 1e3,
            p_rep: units::dbm_to_watt(self.p_rep_dbm),
            omega_min: 2.0 * PI * self.band_min_offset_hz,
            omega_max: 2.0 * PI * self.band_max_offset_hz,
            probe_power: units::dbm_to_watt(self.probe_power_dbm),
            probe_frequency: self.probe_frequency_hz,
            gap_width: 4.0 * PI * self.band_min_offset_hz,
            seed: self.seed,
            kicker_enabled: self.kicker_enabled,
            repeater_ase_enabled: self.repeater_ase_enabled,
            noise_figure_db: self.noise_figure_db,
            repeater_gain_db: self.repeater_gain_db,
        }
    }

    pub fn polarimeter(&self, osnr_db: Option<f64>) -> PolarimeterSettings {
        PolarimeterSettings {
            sample_period: self.sample_period_ns * 1e-9,
            adc_bits: self.adc_bits,
            electrical_cutoff: 2.0 * PI * self.electrical_cutoff_hz,
            optical_filter_fwhm: self.optical_filter_fwhm_hz,
            osnr_db,
        }
    }

    pub fn band(&self) -> PolarimeterBand {
        PolarimeterBand { omega_e: 2.0 * PI * self.electrical_cutoff_hz }
    }

    pub fn propagation(&self) -> PropagationSettings {
        PropagationSettings {
            max_nl_phase_per_step: self.max_nl_phase_rad,
            min_steps_per_plate: 1,
            include_antisymmetric_term: self.include_antisymmetric_term,
            include_coherent_coupling_term: self.include_coherent_coupling_term,
            guard_fraction: self.guard_fraction,
            alias_tolerance: self.alias_tolerance,
        }
    }

    /// rad/s
    pub fn pitch(&self) -> f64 {
        2.0 * PI * self.comb_pitch_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let e = ScenarioConfig::from_toml_str("span_length = 93\n").unwrap_err();
        assert!(e.is_config_error());
    }

    #[test]
    fn empty_file_gives_desk_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c, ScenarioConfig::desk());
    }

    #[test]
    fn round_trip() {
        let mut c = ScenarioConfig::desk();
        c.osnr_db = Some(12.0);
        c.mode = Mode::PowerSweep;
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_sweep_list_rejected() {
        let e = ScenarioConfig::from_toml_str("mode = \"distance_sweep\"\ncirculations = []\n").unwrap_err();
        assert!(matches!(e, NldpError::Config(_)));
    }

    #[test]
    fn full_band_is_valid_for_analytics() {
        ScenarioConfig::full_band().validate().unwrap();
    }
}
