//! Physical link description: fiber parameters, random waveplate chains,
//! repeaters and the recirculating-loop topology.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::polarization::{waveplate_unchecked, JonesMatrix};
use crate::rng;
use crate::units;

pub const DEFAULT_CENTER_FREQUENCY: f64 = 193.9e12;
pub const MIN_PLATE_LENGTH: f64 = 10.0;
pub const MAX_PLATE_LENGTH: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    /// power attenuation, 1/m
    pub alpha: f64,
    /// s^2/m
    pub beta2: f64,
    /// 1/(W m)
    pub gamma: f64,
    /// mean DGD per sqrt(length), s/sqrt(m)
    pub tau_p: f64,
    /// retarded frame, always 0 in practice
    pub beta1: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self::from_units(0.2, -21.7, 1.3, 0.04)
    }
}

impl FiberParams {
    /// dB/km, ps^2/km, 1/(W km), ps/sqrt(km)
    pub fn from_units(alpha_db_km: f64, beta2_ps2_km: f64, gamma_w_km: f64, tau_p_ps_sqrt_km: f64) -> Self {
        Self {
            alpha: units::db_per_km_to_alpha(alpha_db_km),
            beta2: units::ps2_per_km(beta2_ps2_km),
            gamma: units::per_w_km(gamma_w_km),
            tau_p: units::ps_per_sqrt_km(tau_p_ps_sqrt_km),
            beta1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.alpha, self.beta2, self.gamma, self.tau_p, self.beta1]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid("fiber parameters must be finite"));
        }
        if !(self.alpha > 0.0) {
            return Err(invalid("alpha must be positive"));
        }
        if self.gamma < 0.0 || self.tau_p < 0.0 {
            return Err(invalid("gamma and tau_p must be non-negative"));
        }
        Ok(())
    }

    /// Effective nonlinear length of a span.
    pub fn effective_length(&self, l0: f64) -> f64 {
        (1.0 - (-self.alpha * l0).exp()) / self.alpha
    }
}

/// How the per-plate birefringence strength is tied to `tau_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmdCalibration {
    /// <tau^2> = 1.5 tau_p^2 L: the sphere-averaged SOP correlation between two
    /// frequencies is then exactly (1/2) exp(-dw^2 tau_p^2 L / 2).
    #[default]
    SopCorrelation,
    /// Mean DGD of the Maxwellian equals tau_p sqrt(L), i.e. <tau^2> = (3 pi / 8) tau_p^2 L.
    MeanDgd,
}

impl PmdCalibration {
    /// <tau^2> / (tau_p^2 L)
    pub fn variance_factor(self) -> f64 {
        match self {
            PmdCalibration::SopCorrelation => 1.5,
            PmdCalibration::MeanDgd => 3.0 * PI / 8.0,
        }
    }
}

/// A single non-birefringence-varying fiber section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveplate {
    /// m
    pub length: f64,
    /// position of the plate center along the span, m
    pub center: f64,
    pub xi: f64,
    /// half-retardation at the reference frequency
    pub zeta: f64,
    /// differential group delay of the plate, s; zeta(w) = zeta + dgd * w / 2
    pub dgd: f64,
}

impl Waveplate {
    /// Jones matrix at angular offset `w` from the realization's reference frequency.
    pub fn jones(&self, w: f64) -> JonesMatrix {
        waveplate_unchecked(self.xi, self.zeta + 0.5 * self.dgd * w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveplateRealization {
    pub plates: Vec<Waveplate>,
    /// optical frequency the plate retardations refer to, Hz
    pub reference_frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanOptions {
    pub center_frequency: f64,
    pub calibration: PmdCalibration,
}

impl Default for SpanOptions {
    fn default() -> Self {
        Self { center_frequency: DEFAULT_CENTER_FREQUENCY, calibration: PmdCalibration::default() }
    }
}

impl WaveplateRealization {
    /// Plates without any birefringence or rotation; handy for oracle runs.
    pub fn aligned(l0: f64, plate_length: f64) -> Result<Self> {
        if !(l0 > 0.0) || !(plate_length > 0.0) {
            return Err(invalid("lengths must be positive"));
        }
        let n = (l0 / plate_length).ceil() as usize;
        let mut plates = Vec::with_capacity(n);
        let mut z = 0.0;
        for i in 0..n {
            let dz = if i + 1 == n { l0 - z } else { plate_length };
            plates.push(Waveplate { length: dz, center: z + dz / 2.0, xi: 0.0, zeta: 0.0, dgd: 0.0 });
            z += dz;
        }
        Ok(Self { plates, reference_frequency: DEFAULT_CENTER_FREQUENCY })
    }

    pub fn length(&self) -> f64 {
        self.plates.iter().map(|p| p.length).sum()
    }

    /// Chain transfer matrix (last plate leftmost) at angular offset `w`.
    pub fn jones_at(&self, w: f64) -> JonesMatrix {
        self.plates.iter().fold(JonesMatrix::identity(), |acc, p| p.jones(w) * acc)
    }

    /// Chain matrix and its derivative with respect to frequency.
    pub fn jones_with_derivative(&self, w: f64) -> (JonesMatrix, JonesMatrix) {
        let mut u = JonesMatrix::identity();
        let mut du = JonesMatrix::zero();
        for p in &self.plates {
            let m = p.jones(w);
            // d/dw of diag(e^{j zeta}, e^{-j zeta}) R(xi) is diag(j dgd/2, -j dgd/2) M
            let h = C64::new(0.0, 0.5 * p.dgd);
            let dm = JonesMatrix::diag(h, -h) * m;
            du = dm * u + m * du;
            u = m * u;
        }
        (u, du)
    }

    /// Differential group delay of the chain at offset `w`, s.
    pub fn dgd_at(&self, w: f64) -> f64 {
        let (_, du) = self.jones_with_derivative(w);
        2.0 * du.det().norm().sqrt()
    }

    /// Sum of squared plate DGDs; equals <tau^2> in expectation.
    pub fn dgd_variance_budget(&self) -> f64 {
        self.plates.iter().map(|p| p.dgd * p.dgd).sum()
    }
}

/// Random waveplate chain of total length `l0`.
pub fn realize_span(params: &FiberParams, l0: f64, seed: u64) -> Result<WaveplateRealization> {
    realize_span_with(params, l0, seed, SpanOptions::default())
}

pub fn realize_span_with(
    params: &FiberParams,
    l0: f64,
    seed: u64,
    opts: SpanOptions,
) -> Result<WaveplateRealization> {
    if !(l0 >= MAX_PLATE_LENGTH) || !l0.is_finite() {
        return Err(invalid(format!("span length {l0} m is below {MAX_PLATE_LENGTH} m")));
    }
    params.validate()?;
    let mut rng = rng::stream(seed, &[rng::label::SPAN]);
    let kappa = opts.calibration.variance_factor() * params.tau_p * params.tau_p;
    let w_ref = 2.0 * PI * opts.center_frequency;
    let mut plates = Vec::with_capacity((l0 / 50.0) as usize + 2);
    let mut z = 0.0;
    while z < l0 {
        let mut dz = rng.random_range(MIN_PLATE_LENGTH..MAX_PLATE_LENGTH);
        if z + dz >= l0 {
            dz = l0 - z;
        }
        let xi = rng.random_range(0.0..2.0 * PI);
        let dgd = if kappa > 0.0 {
            Normal::new(0.0, (kappa * dz).sqrt()).expect("finite sigma").sample(&mut rng)
        } else {
            0.0
        };
        let zeta = 0.5 * dgd * w_ref;
        plates.push(Waveplate { length: dz, center: z + dz / 2.0, xi, zeta, dgd });
        z += dz;
    }
    // absorb rounding so the lengths add up exactly
    let total: f64 = plates.iter().map(|p| p.length).sum();
    if let Some(last) = plates.last_mut() {
        last.length += l0 - total;
    }
    Ok(WaveplateRealization { plates, reference_frequency: opts.center_frequency })
}

/// Closed-form SOP correlation between two frequencies: (1/2) exp(-(1/2) dw^2 tau_p^2 dL).
pub fn pmd_decorrelation(delta_omega: f64, tau_p: f64, delta_l: f64) -> f64 {
    debug_assert!(delta_l >= 0.0);
    0.5 * (-0.5 * delta_omega * delta_omega * tau_p * tau_p * delta_l).exp()
}

/// Input-averaged half correlation (1/2)<s(w1).s(w2)> of output SOPs through one chain.
pub fn sop_correlation(span: &WaveplateRealization, w1: f64, w2: f64) -> f64 {
    let u1 = span.jones_at(w1);
    let u2 = span.jones_at(w2);
    let t = (u1.adjoint() * u2).trace().norm_sqr();
    0.5 * (t - 1.0) / 3.0
}

/// Loop and repeater layout plus the launched powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub n_spans: usize,
    /// kicker fires after every this many spans
    pub spans_per_circulation: usize,
    /// m
    pub span_length: f64,
    /// total launch power restored by each repeater, W
    pub p_rep: f64,
    /// rad/s offsets of the loading band edges from the probe
    pub omega_min: f64,
    pub omega_max: f64,
    /// W
    pub probe_power: f64,
    /// Hz
    pub probe_frequency: f64,
    /// rad/s
    pub gap_width: f64,
    pub seed: u64,
    pub kicker_enabled: bool,
    pub repeater_ase_enabled: bool,
    pub noise_figure_db: f64,
    /// constant-gain setting used for ASE; None means e^{alpha L0}
    pub repeater_gain_db: Option<f64>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            n_spans: 110,
            spans_per_circulation: 11,
            span_length: 93e3,
            p_rep: units::dbm_to_watt(20.9),
            omega_min: 2.0 * PI * 50e9,
            omega_max: 2.0 * PI * 2.5e12,
            probe_power: units::dbm_to_watt(-5.2),
            probe_frequency: DEFAULT_CENTER_FREQUENCY,
            gap_width: 2.0 * PI * 100e9,
            seed: 1,
            kicker_enabled: true,
            repeater_ase_enabled: false,
            noise_figure_db: 5.0,
            repeater_gain_db: None,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_spans < 1 || self.spans_per_circulation < 1 {
            return Err(invalid("need at least one span"));
        }
        if !(self.omega_min > 0.0 && self.omega_min < self.omega_max) {
            return Err(invalid("need 0 < omega_min < omega_max"));
        }
        if !(self.p_rep > 0.0 && self.probe_power > 0.0) {
            return Err(invalid("powers must be positive"));
        }
        if !(self.span_length > 0.0) {
            return Err(invalid("span length must be positive"));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.n_spans as f64 * self.span_length
    }

    /// Linear power gain the repeaters are set to.
    pub fn nominal_gain(&self, params: &FiberParams) -> f64 {
        match self.repeater_gain_db {
            Some(db) => units::db_to_linear(db),
            None => (params.alpha * self.span_length).exp(),
        }
    }

    /// ASE density one repeater adds, W/Hz per polarization.
    pub fn ase_psd_per_pol(&self, params: &FiberParams) -> f64 {
        ase_psd_per_pol(self.nominal_gain(params), self.noise_figure_db, self.probe_frequency)
    }

    /// OSNR (0.1 nm, both polarizations) of the probe after `n_spans` repeaters.
    pub fn received_osnr_db(&self, params: &FiberParams, n_spans: usize) -> f64 {
        let ase = 2.0 * self.ase_psd_per_pol(params) * REFERENCE_BANDWIDTH * n_spans as f64;
        units::linear_to_db(self.probe_power / ase)
    }
}

/// 0.1 nm at 1550 nm
pub const REFERENCE_BANDWIDTH: f64 = 12.5e9;

/// Flat gain restoring `target_power`.
pub fn repeater_gain(field_power_in: f64, target_power: f64) -> Result<f64> {
    if !(field_power_in > 0.0) || !(target_power > 0.0) {
        return Err(invalid("repeater needs positive input and target power"));
    }
    Ok(target_power / field_power_in)
}

/// Spontaneous-emission density of an amplifier, W/Hz per polarization:
/// n_sp h nu (G - 1) with n_sp = NF / 2.
pub fn ase_psd_per_pol(gain: f64, noise_figure_db: f64, frequency: f64) -> f64 {
    let n_sp = units::db_to_linear(noise_figure_db) / 2.0;
    n_sp * units::PLANCK * frequency * (gain - 1.0).max(0.0)
}

/// Kicker rotation fired after circulation `circulation` of a link seeded with `seed`.
pub fn kicker_rotation(seed: u64, circulation: u64) -> JonesMatrix {
    let mut r = rng::stream(seed, &[rng::label::KICKER, circulation]);
    crate::polarization::haar_rotation_from(&mut r)
}
