//! Split-step extraction of single-span perturbation phasors for comparison
//! with the first-order theory.
//!
//! The loading tones sit on a Golomb ruler, so every tone spacing `l` belongs
//! to exactly one pair and the field at probe + l carries exactly one (l, m)
//! phasor. Each probe polarization is propagated twice with opposite probe
//! signs; half the difference keeps only the part linear in the probe.
//! The x- and y-probe runs then split the symmetric and antisymmetric branches.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::{perturbation_phasor_span, PhasorForm};
use crate::error::{invalid, Result};
use crate::field::{comb_to_time_with_len, CombGrid, CombSpectrum};
use crate::link::{FiberParams, WaveplateRealization};
use crate::polarization::JonesVector;
use crate::ssfm::{PropagationSettings, Propagator, SpectralField};

/// Marks of an optimal 8-mark Golomb ruler.
pub const GOLOMB_8: [i64; 8] = [0, 1, 4, 9, 15, 22, 32, 34];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSetup {
    /// rad/s
    pub pitch: f64,
    /// tone index of the first loading mark; the probe sits at tone 0
    pub loading_offset: i64,
    pub marks: Vec<i64>,
    /// total loading power, W
    pub loading_power: f64,
    /// W
    pub probe_power: f64,
    /// span length, m
    pub span_length: f64,
    /// m
    pub plate_length: f64,
    pub samples: usize,
    pub form: PhasorForm,
}

impl Default for OracleSetup {
    fn default() -> Self {
        Self {
            pitch: 2.0 * PI * 55e6,
            loading_offset: 1700,
            marks: GOLOMB_8.to_vec(),
            loading_power: 5e-5,
            probe_power: 1e-5,
            span_length: 93e3,
            plate_length: 250.0,
            samples: 8192,
            form: PhasorForm::Asymptotic,
        }
    }
}

/// One (l, m) phasor per unit probe amplitude, both branches, theory and split-step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorComparison {
    pub l: i64,
    pub m_twice: i64,
    pub symmetric_theory: C64,
    pub symmetric_split_step: C64,
    pub antisymmetric_theory: C64,
    pub antisymmetric_split_step: C64,
}

impl PhasorComparison {
    /// (relative magnitude error, absolute phase error in rad) per branch.
    pub fn errors(&self) -> [(f64, f64); 2] {
        let e = |t: C64, s: C64| ((s.norm() / t.norm() - 1.0).abs(), (s / t).arg().abs());
        [
            e(self.symmetric_theory, self.symmetric_split_step),
            e(self.antisymmetric_theory, self.antisymmetric_split_step),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub phasors: Vec<PhasorComparison>,
    /// peak nonlinear phase of the loading over the span, rad
    pub max_nl_phase: f64,
}

impl OracleReport {
    pub fn worst_magnitude_error(&self) -> f64 {
        self.phasors.iter().flat_map(|p| p.errors()).map(|e| e.0).fold(0.0, f64::max)
    }

    pub fn worst_phase_error(&self) -> f64 {
        self.phasors.iter().flat_map(|p| p.errors()).map(|e| e.1).fold(0.0, f64::max)
    }
}

/// Mostly x-polarized elliptical loading tones of equal power, so both the sum
/// and the difference of the co-polarized beats stay well away from zero.
pub fn golomb_loading(setup: &OracleSetup) -> Result<CombSpectrum> {
    let hi = setup.loading_offset + setup.marks.iter().copied().max().unwrap_or(0);
    let lo = -hi;
    let grid = CombGrid::new(setup.pitch, lo, hi, 0.0)?;
    let mut comb = CombSpectrum::zeros(grid);
    let amp = (setup.loading_power / setup.marks.len() as f64).sqrt();
    for (k, &g) in setup.marks.iter().enumerate() {
        let theta = 0.15 + 0.07 * k as f64;
        let v = JonesVector::new(
            C64::from_polar(amp * theta.cos(), 1.3 * k as f64),
            C64::from_polar(amp * theta.sin(), 0.4 + 2.1 * k as f64),
        );
        comb.set_tone(setup.loading_offset + g, v)?;
    }
    comb.gap = Some((lo, setup.loading_offset - 1));
    Ok(comb)
}

fn with_probe(loading: &CombSpectrum, probe: JonesVector) -> Result<CombSpectrum> {
    let mut c = loading.clone();
    c.set_tone(0, probe)?;
    Ok(c)
}

/// Propagate one comb through the span and return its output spectrum.
fn run(
    comb: &CombSpectrum,
    span: &WaveplateRealization,
    params: &FiberParams,
    settings: &PropagationSettings,
    samples: usize,
) -> Result<SpectralField> {
    let duration = 2.0 * PI / comb.grid.pitch;
    let env = comb_to_time_with_len(comb, duration, samples)?;
    let mut p = Propagator::new(samples);
    let mut f = SpectralField::from_envelope(&env, p.transform());
    p.span(&mut f, span, params, settings)?;
    Ok(f)
}

pub fn compare_span_phasors(setup: &OracleSetup, params: &FiberParams) -> Result<OracleReport> {
    if setup.marks.len() < 2 {
        return Err(invalid("need at least two loading tones"));
    }
    let loading = golomb_loading(setup)?;
    let span = WaveplateRealization::aligned(setup.span_length, setup.plate_length)?;
    let settings = PropagationSettings { max_nl_phase_per_step: 0.01, ..Default::default() };
    let a0 = setup.probe_power.sqrt();
    let probes = [JonesVector::new(C64::new(a0, 0.0), C64::default()), JonesVector::new(C64::default(), C64::new(a0, 0.0))];

    // linear-in-probe output spectra for the x and y probe
    let mut linear = Vec::with_capacity(2);
    for probe in probes {
        let plus = run(&with_probe(&loading, probe)?, &span, params, &settings, setup.samples)?;
        let minus = run(&with_probe(&loading, probe.scale(-1.0))?, &span, params, &settings, setup.samples)?;
        let half = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(p, m)| 0.5 * (p - m)).collect::<Vec<_>>();
        linear.push((half(&plus.sx, &minus.sx), half(&plus.sy, &minus.sy)));
    }

    let n = setup.samples as i64;
    let bin = |t: i64| t.rem_euclid(n) as usize;
    let tones: Vec<i64> = setup.marks.iter().map(|g| setup.loading_offset + g).collect();
    let mut phasors = Vec::new();
    for &n1 in &tones {
        for &n2 in &tones {
            if n1 == n2 {
                continue;
            }
            let l = n1 - n2;
            let m_twice = n1 + n2;
            let tx = perturbation_phasor_span(&with_probe(&loading, probes[0])?, l, m_twice, params, setup.span_length, setup.form)?;
            let ty = perturbation_phasor_span(&with_probe(&loading, probes[1])?, l, m_twice, params, setup.span_length, setup.form)?;
            let q = bin(l);
            let px = linear[0].0[q] / a0;
            let py = linear[1].1[q] / a0;
            phasors.push(PhasorComparison {
                l,
                m_twice,
                symmetric_theory: 0.5 * (tx.symmetric.x + ty.symmetric.y) / a0,
                symmetric_split_step: 0.5 * (px + py),
                antisymmetric_theory: 0.5 * (tx.antisymmetric.x - ty.antisymmetric.y) / a0,
                antisymmetric_split_step: 0.5 * (px - py),
            });
        }
    }
    let peak = {
        let env = comb_to_time_with_len(&loading, 2.0 * PI / setup.pitch, setup.samples)?;
        env.ex.iter().zip(&env.ey).map(|(x, y)| x.norm_sqr() + y.norm_sqr()).fold(0.0, f64::max)
    };
    Ok(OracleReport { phasors, max_nl_phase: params.gamma * peak * params.effective_length(setup.span_length) })
}
