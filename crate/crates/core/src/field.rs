//! Frequency combs and sampled envelopes.
//!
//! Sign convention: E(t) = sum_n A^n e^{-j n w t}, so tone n sits at angular
//! offset n*w above the grid center.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::polarization::JonesVector;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombGrid {
    /// rad/s
    pub pitch: f64,
    pub n_min: i64,
    pub n_max: i64,
    /// Hz
    pub center_frequency: f64,
}

impl CombGrid {
    pub fn new(pitch: f64, n_min: i64, n_max: i64, center_frequency: f64) -> Result<Self> {
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(invalid("comb pitch must be positive"));
        }
        if n_min > n_max {
            return Err(invalid("comb indices must be ordered"));
        }
        Ok(Self { pitch, n_min, n_max, center_frequency })
    }

    /// Symmetric grid covering a full band width `band` (rad/s) around the center.
    pub fn symmetric(pitch: f64, band: f64, center_frequency: f64) -> Result<Self> {
        let half = (0.5 * band / pitch).round() as i64;
        Self::new(pitch, -half, half, center_frequency)
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    /// Full band width, rad/s.
    pub fn band_width(&self) -> f64 {
        self.len() as f64 * self.pitch
    }

    /// Angular offset of tone `n` from the center.
    pub fn offset(&self, n: i64) -> f64 {
        n as f64 * self.pitch
    }

    /// Window length that holds exactly one pitch period.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.pitch
    }

    fn index(&self, n: i64) -> usize {
        (n - self.n_min) as usize
    }

    /// Tone index for an absolute frequency, if it lies on the grid.
    pub fn tone_at(&self, frequency: f64) -> Option<i64> {
        let x = 2.0 * PI * (frequency - self.center_frequency) / self.pitch;
        let n = x.round();
        ((x - n).abs() < 1e-6 && self.contains(n as i64)).then_some(n as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombSpectrum {
    pub grid: CombGrid,
    pub ax: Vec<C64>,
    pub ay: Vec<C64>,
    /// inclusive tone range held at zero
    pub gap: Option<(i64, i64)>,
}

impl CombSpectrum {
    pub fn zeros(grid: CombGrid) -> Self {
        let n = grid.len();
        Self { grid, ax: vec![C64::default(); n], ay: vec![C64::default(); n], gap: None }
    }

    pub fn tone(&self, n: i64) -> Option<JonesVector> {
        self.grid.contains(n).then(|| {
            let i = self.grid.index(n);
            JonesVector::new(self.ax[i], self.ay[i])
        })
    }

    pub fn set_tone(&mut self, n: i64, v: JonesVector) -> Result<()> {
        if !self.grid.contains(n) {
            return Err(invalid(format!("tone {n} is off the grid")));
        }
        let i = self.grid.index(n);
        self.ax[i] = v.x;
        self.ay[i] = v.y;
        Ok(())
    }

    pub fn total_power(&self) -> f64 {
        self.ax.iter().chain(&self.ay).map(|a| a.norm_sqr()).sum()
    }

    /// Nonzero tones as (index, Jones phasor).
    pub fn tones(&self) -> impl Iterator<Item = (i64, JonesVector)> + '_ {
        (self.grid.n_min..=self.grid.n_max)
            .zip(self.ax.iter().zip(&self.ay))
            .filter(|(_, (x, y))| x.norm_sqr() + y.norm_sqr() > 0.0)
            .map(|(n, (x, y))| (n, JonesVector::new(*x, *y)))
    }

    pub fn in_gap(&self, n: i64) -> bool {
        self.gap.is_some_and(|(a, b)| (a..=b).contains(&n))
    }

    /// Sum of two combs on the same grid.
    pub fn superpose(&self, other: &CombSpectrum) -> Result<CombSpectrum> {
        if self.grid != other.grid {
            return Err(invalid("cannot superpose combs on different grids"));
        }
        let mut out = self.clone();
        for (a, b) in out.ax.iter_mut().zip(&other.ax) {
            *a += b;
        }
        for (a, b) in out.ay.iter_mut().zip(&other.ay) {
            *a += b;
        }
        out.gap = self.gap.or(other.gap);
        Ok(out)
    }

    pub fn scale(&mut self, k: f64) {
        self.ax.iter_mut().chain(self.ay.iter_mut()).for_each(|a| *a *= k);
    }
}

/// Unpolarized flat loading: i.i.d. circular Gaussian phasors with per-polarization
/// variance p_rep * w / (2 * band), zero inside the gap.
pub fn make_loading(p_rep: f64, grid: CombGrid, gap_center: f64, gap_width: f64, seed: u64) -> Result<CombSpectrum> {
    if !(p_rep > 0.0) {
        return Err(invalid("loading power must be positive"));
    }
    if !(gap_width >= 0.0) || gap_width >= grid.band_width() {
        return Err(invalid("gap wider than the band"));
    }
    let gc = 2.0 * PI * (gap_center - grid.center_frequency);
    let lo = ((gc - 0.5 * gap_width) / grid.pitch).ceil() as i64;
    let hi = ((gc + 0.5 * gap_width) / grid.pitch).floor() as i64;
    if lo < grid.n_min || hi > grid.n_max {
        return Err(invalid("gap must lie inside the band"));
    }
    let var = p_rep * grid.pitch / (2.0 * grid.band_width());
    let normal = Normal::new(0.0, (0.5 * var).sqrt()).expect("finite sigma");
    let mut r = rng::stream(seed, &[rng::label::LOADING]);
    let mut comb = CombSpectrum::zeros(grid);
    for n in grid.n_min..=grid.n_max {
        let i = grid.index(n);
        // draw for every tone so gap placement does not shift the stream
        let x = C64::new(normal.sample(&mut r), normal.sample(&mut r));
        let y = C64::new(normal.sample(&mut r), normal.sample(&mut r));
        if !(lo..=hi).contains(&n) {
            comb.ax[i] = x;
            comb.ay[i] = y;
        }
    }
    comb.gap = (lo <= hi).then_some((lo, hi));
    Ok(comb)
}

/// Single probe tone at `frequency` inside the gap of `loading`.
pub fn make_probe(power: f64, frequency: f64, sop: JonesVector, loading: &CombSpectrum) -> Result<CombSpectrum> {
    if !(power > 0.0) {
        return Err(invalid("probe power must be positive"));
    }
    let n = loading
        .grid
        .tone_at(frequency)
        .ok_or_else(|| invalid(format!("probe frequency {frequency} Hz is not on the comb grid")))?;
    if !loading.in_gap(n) {
        return Err(invalid("probe must sit inside the loading gap"));
    }
    let v = sop.normalized()?.scale(power.sqrt());
    let mut comb = CombSpectrum::zeros(loading.grid);
    comb.set_tone(n, v)?;
    comb.gap = loading.gap;
    Ok(comb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexEnvelope {
    /// s
    pub sample_period: f64,
    pub ex: Vec<C64>,
    pub ey: Vec<C64>,
    /// Hz
    pub center_frequency: f64,
}

impl ComplexEnvelope {
    pub fn len(&self) -> usize {
        self.ex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ex.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.sample_period * self.len() as f64
    }

    pub fn mean_power(&self) -> f64 {
        let s: f64 = self.ex.iter().chain(&self.ey).map(|a| a.norm_sqr()).sum();
        s / self.len() as f64
    }

    /// Angular frequency of FFT bin q (bins past N/2 are negative offsets).
    pub fn bin_offset(&self, q: usize) -> f64 {
        bin_offset(q, self.len(), self.duration())
    }

    pub fn sample(&self, k: usize) -> JonesVector {
        JonesVector::new(self.ex[k], self.ey[k])
    }
}

pub(crate) fn bin_offset(q: usize, n: usize, duration: f64) -> f64 {
    let q = if q < n.div_ceil(2) { q as f64 } else { q as f64 - n as f64 };
    2.0 * PI * q / duration
}

/// FFT pair in the envelope convention: time = sum_q S_q e^{-j w_q t}.
#[derive(Clone)]
pub struct SpectralTransform {
    n: usize,
    to_time: Arc<dyn Fft<f64>>,
    to_spec: Arc<dyn Fft<f64>>,
}

impl SpectralTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, to_time: planner.plan_fft_forward(n), to_spec: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In place: spectrum amplitudes -> time samples.
    pub fn to_time(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.to_time.process_with_scratch(buf, scratch);
    }

    /// In place: time samples -> spectrum amplitudes, unnormalized (times N).
    pub fn to_spectrum_unscaled(&self, buf: &mut [C64], scratch: &mut [C64]) {
        self.to_spec.process_with_scratch(buf, scratch);
    }

    pub fn scratch_len(&self) -> usize {
        self.to_time.get_inplace_scratch_len().max(self.to_spec.get_inplace_scratch_len())
    }

    pub fn to_spectrum(&self, buf: &mut [C64]) {
        let mut scratch = vec![C64::default(); self.scratch_len()];
        self.to_spectrum_unscaled(buf, &mut scratch);
        let k = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= k);
    }

    pub fn to_time_alloc(&self, buf: &mut [C64]) {
        let mut scratch = vec![C64::default(); self.scratch_len()];
        self.to_time(buf, &mut scratch);
    }
}

fn periods_in(duration: f64, pitch: f64) -> Result<usize> {
    let k = duration * pitch / (2.0 * PI);
    let kr = k.round();
    if !(kr >= 1.0) || (k - kr).abs() > 1e-9 * kr.max(1.0) {
        return Err(invalid(format!("window {duration} s does not hold an integer number of pitch periods")));
    }
    Ok(kr as usize)
}

/// Synthesize the envelope over `duration`, choosing a power-of-two sample count
/// that keeps the comb below half of Nyquist.
pub fn comb_to_time(comb: &CombSpectrum, duration: f64) -> Result<ComplexEnvelope> {
    let k = periods_in(duration, comb.grid.pitch)?;
    let max_bin = comb.grid.n_min.unsigned_abs().max(comb.grid.n_max.unsigned_abs()) as usize * k;
    let n = (4 * max_bin).max(8).next_power_of_two();
    comb_to_time_with_len(comb, duration, n)
}

pub fn comb_to_time_with_len(comb: &CombSpectrum, duration: f64, n: usize) -> Result<ComplexEnvelope> {
    let k = periods_in(duration, comb.grid.pitch)?;
    if n < 2 {
        return Err(invalid("envelope needs at least two samples"));
    }
    let half = n as i64 / 2;
    let mut sx = vec![C64::default(); n];
    let mut sy = vec![C64::default(); n];
    for (t, (x, y)) in (comb.grid.n_min..=comb.grid.n_max).zip(comb.ax.iter().zip(&comb.ay)) {
        let q = t * k as i64;
        if q >= half || q < -half {
            if x.norm_sqr() + y.norm_sqr() > 0.0 {
                return Err(invalid(format!("tone {t} exceeds the Nyquist range of {n} samples")));
            }
            continue;
        }
        let qi = q.rem_euclid(n as i64) as usize;
        sx[qi] = *x;
        sy[qi] = *y;
    }
    let tr = SpectralTransform::new(n);
    tr.to_time_alloc(&mut sx);
    tr.to_time_alloc(&mut sy);
    Ok(ComplexEnvelope { sample_period: duration / n as f64, ex: sx, ey: sy, center_frequency: comb.grid.center_frequency })
}

/// Extract tone phasors on `grid` from a periodic envelope.
pub fn time_to_comb(env: &ComplexEnvelope, grid: CombGrid) -> Result<CombSpectrum> {
    let k = periods_in(env.duration(), grid.pitch)?;
    let n = env.len();
    let tr = SpectralTransform::new(n);
    let mut sx = env.ex.clone();
    let mut sy = env.ey.clone();
    tr.to_spectrum(&mut sx);
    tr.to_spectrum(&mut sy);
    let mut comb = CombSpectrum::zeros(grid);
    let half = n as i64 / 2;
    for t in grid.n_min..=grid.n_max {
        let q = t * k as i64;
        if q >= half || q < -half {
            continue;
        }
        let qi = q.rem_euclid(n as i64) as usize;
        comb.set_tone(t, JonesVector::new(sx[qi], sy[qi]))?;
    }
    Ok(comb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> CombGrid {
        CombGrid::new(2.0 * PI * 100e6, -40, 40, 193.9e12).unwrap()
    }

    #[test]
    fn single_tone_is_flat() {
        let mut c = CombSpectrum::zeros(grid());
        c.set_tone(0, JonesVector::new(C64::new(0.5, 0.0), C64::new(0.0, 0.0))).unwrap();
        let env = comb_to_time(&c, grid().period()).unwrap();
        for v in &env.ex {
            assert_relative_eq!(v.norm(), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn probe_outside_gap_rejected() {
        let g = grid();
        let loading = make_loading(1e-3, g, g.center_frequency, 2.0 * PI * 1e9, 3).unwrap();
        let inside = make_probe(1e-4, g.center_frequency, JonesVector::x_pol(), &loading);
        assert!(inside.is_ok());
        let outside = make_probe(1e-4, g.center_frequency + 1.5e9, JonesVector::x_pol(), &loading);
        assert!(outside.is_err());
    }

    #[test]
    fn gap_wider_than_band_rejected() {
        let g = grid();
        assert!(make_loading(1e-3, g, g.center_frequency, 2.0 * PI * 20e9, 1).is_err());
    }

    #[test]
    fn incommensurate_window_rejected() {
        let c = CombSpectrum::zeros(grid());
        assert!(comb_to_time(&c, 1.37 * grid().period()).is_err());
    }
}
