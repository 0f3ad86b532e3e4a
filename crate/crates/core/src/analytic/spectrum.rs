//! Span-summed variances, the PMD-decorrelated autocorrelation and the
//! SOP-speed prediction.
//!
//! Where a closed form only balances its units with an extra span-length
//! factor, that variant is the default and the unscaled one is kept alongside.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::PolarimeterBand;
use crate::error::{invalid, NldpError, Result};
use crate::field::CombSpectrum;
use crate::link::{FiberParams, LinkConfig};

fn check_band(link: &LinkConfig) -> Result<()> {
    if !(link.omega_min > 0.0) {
        return Err(invalid("omega_min must be positive (the band sum diverges logarithmically)"));
    }
    if !(link.omega_max > link.omega_min) {
        return Err(invalid("omega_max must exceed omega_min"));
    }
    Ok(())
}

/// Loading power density per unit angular frequency on one side of the probe.
fn density(link: &LinkConfig) -> f64 {
    link.p_rep / (link.omega_max - link.omega_min)
}

/// Total symmetric phase variance per unit probe power, rad^2:
/// (8/9) pi (gamma/alpha)^2 e^{-alpha L0} N_s ln(W_max/W_min) (P/dW)^2 / (|beta2| L0).
pub fn symmetric_phase_variance(link: &LinkConfig, params: &FiberParams) -> Result<f64> {
    check_band(link)?;
    let b2 = params.beta2.abs();
    if b2 == 0.0 {
        return Err(NldpError::Domain("zero dispersion makes the symmetric variance diverge".into()));
    }
    let l0 = link.span_length;
    let r = params.gamma / params.alpha;
    Ok(8.0 / 9.0 * PI * r * r * (-params.alpha * l0).exp() / (b2 * l0)
        * link.n_spans as f64
        * density(link).powi(2)
        * (link.omega_max / link.omega_min).ln())
}

/// Resolution settings of the numeric autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSettings {
    /// l-sum pitch, rad/s
    pub pitch: f64,
    /// quadrature nodes of the continuum m-integral
    pub m_nodes: usize,
    /// l-sum stops once a term falls below this fraction of the running total
    pub l_tolerance: f64,
    pub normalization: ProbeNormalization,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        Self { pitch: 2.0 * PI * 50e3, m_nodes: 2001, l_tolerance: 1e-6, normalization: ProbeNormalization::Received }
    }
}

/// Which probe amplitude the perturbation is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProbeNormalization {
    /// the probe at the span end; it decays like the perturbation, so no
    /// span-loss factor appears. This is what a polarimeter sees.
    #[default]
    Received,
    /// the launched probe, which adds a factor e^{-alpha L0}
    Launch,
}

impl ProbeNormalization {
    fn factor(self, params: &FiberParams, l0: f64) -> f64 {
        match self {
            ProbeNormalization::Received => 1.0,
            ProbeNormalization::Launch => (-params.alpha * l0).exp(),
        }
    }
}

/// Where the G-wave centers come from.
#[derive(Debug, Clone)]
enum MSum {
    /// flat loading between omega_min and omega_max on both sides of the probe
    Continuum { nodes: Vec<(f64, f64)> },
    /// actual tone pairs of a synthesized comb: (offset of pair center from probe, weight)
    Comb { probe: i64, tones: Vec<i64>, pitch: f64, pair_variance: f64 },
}

/// Antisymmetric (NLDP) phase statistics of one link.
#[derive(Debug, Clone)]
pub struct NldpModel {
    params: FiberParams,
    n_spans: f64,
    l0: f64,
    omega_e: f64,
    settings: AnalyticSettings,
    prefactor: f64,
    msum: MSum,
}

impl NldpModel {
    /// Flat-spectrum model with the continuum m-integral.
    pub fn new(link: &LinkConfig, params: &FiberParams, band: PolarimeterBand, settings: AnalyticSettings) -> Result<Self> {
        check_band(link)?;
        params.validate()?;
        if !(band.omega_e > 0.0) {
            return Err(invalid("omega_e must be positive"));
        }
        if settings.m_nodes < 3 || !(settings.pitch > 0.0) {
            return Err(invalid("analytic settings need a positive pitch and at least 3 nodes"));
        }
        // Simpson nodes in u = ln M; each weight carries the Jacobian M
        let n = settings.m_nodes | 1;
        let (u0, u1) = (link.omega_min.ln(), link.omega_max.ln());
        let h = (u1 - u0) / (n - 1) as f64;
        let nodes = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let m = (u0 + h * i as f64).exp();
                (m, w * h / 3.0 * m)
            })
            .collect();
        let r = 2.0 * params.gamma / (3.0 * params.alpha);
        // <|A|^2> = 2 v^2 with per-polarization tone variance v = P w / (4 dW); the two
        // pitch factors cancel against the Riemann sums over m and l
        let pair = 2.0 * (density(link) / 4.0).powi(2);
        Ok(Self {
            params: *params,
            n_spans: link.n_spans as f64,
            l0: link.span_length,
            omega_e: band.omega_e,
            settings,
            prefactor: r * r * settings.normalization.factor(params, link.span_length) * pair,
            msum: MSum::Continuum { nodes },
        })
    }

    /// Model over the tone pairs of a concrete loading comb (desk-scale cross-checks).
    /// `per_pol_variance` is the expected |A^n_x|^2 of one loading tone.
    pub fn for_comb(
        link: &LinkConfig,
        params: &FiberParams,
        band: PolarimeterBand,
        loading: &CombSpectrum,
        probe_index: i64,
        per_pol_variance: f64,
    ) -> Result<Self> {
        params.validate()?;
        let tones: Vec<i64> = (loading.grid.n_min..=loading.grid.n_max).filter(|&n| !loading.in_gap(n)).collect();
        let r = 2.0 * params.gamma / (3.0 * params.alpha);
        let pitch = loading.grid.pitch;
        let settings = AnalyticSettings { pitch, ..AnalyticSettings::default() };
        Ok(Self {
            params: *params,
            n_spans: link.n_spans as f64,
            l0: link.span_length,
            omega_e: band.omega_e,
            settings,
            prefactor: r * r * settings.normalization.factor(params, link.span_length),
            msum: MSum::Comb { probe: probe_index, tones, pitch, pair_variance: 2.0 * per_pol_variance * per_pol_variance },
        })
    }

    /// PMD and loop-length decorrelation denominator of one G-wave.
    fn d_m(&self, m_omega: f64) -> f64 {
        0.5 * m_omega * m_omega * self.params.tau_p * self.params.tau_p * self.l0 + 2.0 / self.n_spans
    }

    /// Ns/D * Lorentzians in the phase mismatch for G-wave at M and offset `delta`.
    fn pair_weight(&self, m_omega: f64, delta: f64) -> f64 {
        let b2 = self.params.beta2.abs();
        let x = b2 * delta * m_omega;
        let d = self.d_m(m_omega);
        let l1 = 1.0 / (1.0 + (x / self.params.alpha).powi(2));
        let l2 = 1.0 / (1.0 + (x * self.l0 / d).powi(2));
        self.n_spans / d * l1 * l2
    }

    fn lowpass(&self, delta: f64) -> f64 {
        1.0 / (1.0 + (delta / self.omega_e).powi(2))
    }

    /// Power spectrum of the antisymmetric phase at offset `delta` (per unit l-pitch),
    /// optionally without the polarimeter low-pass.
    pub fn profile(&self, delta: f64, with_lowpass: bool) -> f64 {
        let lp = if with_lowpass { self.lowpass(delta) } else { 1.0 };
        let s = match &self.msum {
            MSum::Continuum { nodes } => {
                // both sides of the probe contribute equally
                2.0 * nodes.iter().map(|&(m, w)| w * self.pair_weight(m, delta)).sum::<f64>()
            }
            MSum::Comb { .. } => {
                let l = (delta / self.settings.pitch).round() as i64;
                return self.comb_term(l) * if with_lowpass { 1.0 } else { 1.0 / self.lowpass(delta) };
            }
        };
        self.prefactor * s * lp
    }

    fn comb_term(&self, l: i64) -> f64 {
        let MSum::Comb { probe, tones, pitch, pair_variance } = &self.msum else {
            return 0.0;
        };
        let delta = l as f64 * pitch;
        let mut s = 0.0;
        for &n2 in tones {
            let n1 = n2 + l;
            if tones.binary_search(&n1).is_ok() {
                let m = 0.5 * (n1 + n2 - 2 * probe) as f64 * pitch;
                s += self.pair_weight(m, delta);
            }
        }
        self.prefactor * pair_variance * s * self.lowpass(delta)
    }

    fn l_term(&self, l: i64) -> f64 {
        match self.msum {
            MSum::Continuum { .. } => {
                let w = self.settings.pitch;
                w * self.profile(l as f64 * w, true)
            }
            MSum::Comb { .. } => self.comb_term(l),
        }
    }

    /// Field-normalized autocorrelation R(tau) of the antisymmetric phase at each lag.
    pub fn autocorrelation(&self, taus: &[f64]) -> Vec<f64> {
        let w = self.settings.pitch;
        let mut acc: Vec<f64> = taus.iter().map(|_| self.l_term(0)).collect();
        let mut running = self.l_term(0);
        let mut l = 1i64;
        loop {
            // profile is even in l
            let t = 2.0 * self.l_term(l);
            running += t;
            for (a, &tau) in acc.iter_mut().zip(taus) {
                *a += t * (l as f64 * w * tau).cos();
            }
            if t <= self.settings.l_tolerance * running || l > 50_000_000 {
                break;
            }
            if let MSum::Comb { tones, .. } = &self.msum {
                if l > tones.last().copied().unwrap_or(0) - tones.first().copied().unwrap_or(0) {
                    break;
                }
            }
            l += 1;
        }
        acc
    }

    /// Offset (rad/s) where the l-profile falls to half its low-offset value.
    pub fn half_width(&self, with_lowpass: bool) -> f64 {
        let p0 = self.profile(1e-6 * self.omega_e, with_lowpass);
        let (mut lo, mut hi) = (1e-6 * self.omega_e, self.omega_e);
        while self.profile(hi, with_lowpass) > 0.5 * p0 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = (lo * hi).sqrt();
            if self.profile(mid, with_lowpass) > 0.5 * p0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    /// Sphere-averaged SOP speed from the antisymmetric phase: a phase +-phi on
    /// the two axes turns S by 2 phi about s1, so <|dS|^2> = (16/3)(R(0) - R(tau_s)).
    pub fn sop_speed_second_moment(&self, tau_s: f64) -> f64 {
        let r = self.autocorrelation(&[0.0, tau_s]);
        16.0 / 3.0 * (r[0] - r[1]) / (tau_s * tau_s)
    }
}

/// Autocorrelation of the antisymmetric phase at lag `tau` with default resolution.
pub fn nldp_autocorrelation(link: &LinkConfig, params: &FiberParams, band: PolarimeterBand, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(invalid("lag must be non-negative"));
    }
    let m = NldpModel::new(link, params, band, AnalyticSettings::default())?;
    Ok(m.autocorrelation(&[tau])[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SopSpeedPrediction {
    /// rad/s
    pub rms: f64,
    /// (rad/s)^2
    pub second_moment: f64,
    /// N_s-independent bracket term
    pub offset_term: f64,
    /// PMD bracket term, linear in N_s
    pub pmd_term: f64,
    /// prefactor without the 1/L0^2; not in (rad/s)^2
    pub unscaled_second_moment: f64,
}

/// Closed-form second moment of the SOP speed:
/// (20/27) (gamma / (alpha beta2 L0))^2 [Omega_e pi / (alpha L0 Omega_min)
///   + (tau_p^2 / 4 beta2) N_s pi ln(1 + beta2 Omega_e Omega_max / alpha)] (P/dW)^2.
pub fn sop_speed_prediction(link: &LinkConfig, params: &FiberParams, band: PolarimeterBand) -> Result<SopSpeedPrediction> {
    check_band(link)?;
    params.validate()?;
    let b2 = params.beta2.abs();
    let (a, l0, we) = (params.alpha, link.span_length, band.omega_e);
    if !(b2 > 0.0) || !(we >= 0.0) {
        return Err(NldpError::Domain("need nonzero dispersion and a non-negative electrical bandwidth".into()));
    }
    let offset_term = we / (a * l0) * PI / link.omega_min;
    let log_arg = 1.0 + b2 * we / a * link.omega_max;
    if !(log_arg > 0.0) {
        return Err(NldpError::Domain(format!("logarithm argument {log_arg} is not positive")));
    }
    let pmd_term = params.tau_p * params.tau_p / (4.0 * b2) * link.n_spans as f64 * PI * log_arg.ln();
    let bracket = offset_term + pmd_term;
    if bracket < 0.0 {
        return Err(NldpError::Domain(format!("negative bracket: offset {offset_term}, pmd {pmd_term}")));
    }
    let unscaled = 20.0 / 27.0 * params.gamma.powi(2) / (b2 * b2 * a * a) * bracket * density(link).powi(2);
    let second = unscaled / (l0 * l0);
    Ok(SopSpeedPrediction {
        rms: second.sqrt(),
        second_moment: second,
        offset_term,
        pmd_term,
        unscaled_second_moment: unscaled,
    })
}

/// The four 3-dB roll-off frequencies, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloffTable {
    /// 1 / (pi tau_p sqrt(L0 Ns))
    pub pmd_link: f64,
    /// 1 / (pi sqrt2 tau_p sqrt(L0))
    pub pmd_span: f64,
    /// 1 / (pi sqrt2 tau_p) without the sqrt(L0); unit-inconsistent
    pub pmd_span_unscaled: f64,
    /// sqrt(2 alpha) / (2 pi tau_p): where (1/2)(M tau_p)^2 L0 reaches alpha L0
    pub pmd_span_balanced: f64,
    /// 1 / (pi Ns beta2 Omega_e L0)
    pub walkoff_link: f64,
    /// alpha / (2 pi beta2 Omega_e)
    pub walkoff_span: f64,
}

impl RolloffTable {
    pub fn reported(&self) -> [f64; 4] {
        [self.pmd_link, self.pmd_span, self.walkoff_link, self.walkoff_span]
    }
}

pub fn rolloff_table(params: &FiberParams, link: &LinkConfig, band: PolarimeterBand) -> RolloffTable {
    let tp = params.tau_p;
    let l0 = link.span_length;
    let ns = link.n_spans as f64;
    let b2 = params.beta2.abs();
    RolloffTable {
        pmd_link: 1.0 / (PI * tp * (l0 * ns).sqrt()),
        pmd_span: 1.0 / (PI * 2f64.sqrt() * tp * l0.sqrt()),
        pmd_span_unscaled: 1.0 / (PI * 2f64.sqrt() * tp),
        pmd_span_balanced: (2.0 * params.alpha).sqrt() / (2.0 * PI * tp),
        walkoff_link: 1.0 / (PI * ns * b2 * band.omega_e * l0),
        walkoff_span: params.alpha / (2.0 * PI * b2 * band.omega_e),
    }
}

/// Bundle of the analytic outputs at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NldpPrediction {
    /// rad^2 per unit probe power
    pub sigma2_sym: f64,
    pub lags: Vec<f64>,
    pub sigma2_nldp_tau: Vec<f64>,
    /// (rad/s)^2
    pub second_moment: f64,
    /// rad/s
    pub sop_speed_rms: f64,
    /// rad/s, from the autocorrelation at the first nonzero lag
    pub numeric_sop_speed_rms: Option<f64>,
}

pub fn predict(link: &LinkConfig, params: &FiberParams, band: PolarimeterBand, lags: &[f64]) -> Result<NldpPrediction> {
    let sym = symmetric_phase_variance(link, params)?;
    let model = NldpModel::new(link, params, band, AnalyticSettings::default())?;
    let acf = model.autocorrelation(lags);
    let sop = sop_speed_prediction(link, params, band)?;
    let numeric = lags.iter().find(|&&t| t > 0.0).map(|&t| model.sop_speed_second_moment(t).sqrt());
    Ok(NldpPrediction {
        sigma2_sym: sym,
        lags: lags.to_vec(),
        sigma2_nldp_tau: acf,
        second_moment: sop.second_moment,
        sop_speed_rms: sop.rms,
        numeric_sop_speed_rms: numeric,
    })
}
