//! Virtual polarimeter: detection with signal-ASE beat noise, electrical
//! low-pass, ADC, SOP-speed series, histograms and variance subtraction.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NldpError, Result};
use crate::field::{ComplexEnvelope, SpectralTransform};
use crate::link::REFERENCE_BANDWIDTH;
use crate::polarization::StokesVector;
use crate::rng;
use crate::units::db_to_linear;

pub const HISTOGRAM_BINS: usize = 1024;
/// rad/s
pub const DEFAULT_BIN_WIDTH: f64 = 48.82e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarimeterSettings {
    /// s
    pub sample_period: f64,
    pub adc_bits: u32,
    /// rad/s, first-order low-pass corner
    pub electrical_cutoff: f64,
    /// Hz, brick-wall width around the probe line
    pub optical_filter_fwhm: f64,
    /// dB in 0.1 nm; None detects without noise
    pub osnr_db: Option<f64>,
}

impl Default for PolarimeterSettings {
    fn default() -> Self {
        Self {
            sample_period: 10e-9,
            adc_bits: 14,
            electrical_cutoff: 2.0 * std::f64::consts::PI * 30e6,
            optical_filter_fwhm: 27e9,
            osnr_db: None,
        }
    }
}

impl PolarimeterSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(invalid("sample period must be positive"));
        }
        if !(8..=24).contains(&self.adc_bits) {
            return Err(invalid(format!("adc_bits {} outside [8, 24]", self.adc_bits)));
        }
        if !(self.electrical_cutoff > 0.0) || !(self.optical_filter_fwhm > 0.0) {
            return Err(invalid("filter bandwidths must be positive"));
        }
        if let Some(o) = self.osnr_db {
            if !o.is_finite() {
                return Err(invalid("osnr must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesTrace {
    pub sample_period: f64,
    /// s0 = 1, (s1, s2, s3) on the unit sphere
    pub samples: Vec<StokesVector>,
    pub seed: u64,
    pub scenario: String,
    /// samples where s0 or |s| had to be clamped
    pub clamped: usize,
}

impl StokesTrace {
    pub fn new(sample_period: f64, samples: Vec<StokesVector>) -> Self {
        Self { sample_period, samples, seed: 0, scenario: String::new(), clamped: 0 }
    }

    pub fn warning(&self) -> bool {
        self.clamped > 0
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"SOPT")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&self.sample_period.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            for v in [s.s0, s.s1, s.s2, s.s3] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| NldpError::Format("truncated trace header".into()))?;
        if &magic != b"SOPT" {
            return Err(NldpError::Format("not a Stokes trace (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(|_| NldpError::Format("truncated trace header".into()))?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Err(NldpError::Format(format!("unsupported trace version {version}")));
        }
        r.read_exact(&mut b8).map_err(|_| NldpError::Format("truncated trace header".into()))?;
        let tau = f64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(|_| NldpError::Format("truncated trace header".into()))?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut samples = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let mut v = [0.0; 4];
            for x in &mut v {
                r.read_exact(&mut b8).map_err(|_| NldpError::Format("truncated trace body".into()))?;
                *x = f64::from_le_bytes(b8);
            }
            samples.push(StokesVector::new(v[0], v[1], v[2], v[3]));
        }
        Ok(Self::new(tau, samples))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Filtered Stokes waveform on the envelope's sample grid, before the ADC.
#[derive(Debug, Clone)]
pub struct AnalogStokes {
    pub sample_period: f64,
    pub s: [Vec<f64>; 4],
}

/// Photocurrents (in units of optical power) after the optical filter, the
/// signal-ASE beat noise and the electrical low-pass.
///
/// The ASE is white with per-polarization density P_s / (2 OSNR B_ref) over the
/// simulated band. Only its beat with the probe is kept; ASE-ASE beating is
/// dropped. After the first-order filter each Stokes component then carries
/// the usual 4 P_s N_ase B_e beat-noise variance, B_e = (pi/2) f_c.
pub fn detect_analog(env: &ComplexEnvelope, settings: &PolarimeterSettings, seed: u64) -> Result<AnalogStokes> {
    settings.validate()?;
    let n = env.len();
    if n < 2 || env.duration() < 2.0 * settings.sample_period {
        return Err(invalid("envelope shorter than two sample periods"));
    }
    let tr = SpectralTransform::new(n);
    let mut sx = env.ex.clone();
    let mut sy = env.ey.clone();
    tr.to_spectrum(&mut sx);
    tr.to_spectrum(&mut sy);
    // the filter is tuned to the probe line, i.e. the strongest bin
    let line = (0..n)
        .max_by(|&a, &b| (sx[a].norm_sqr() + sy[a].norm_sqr()).total_cmp(&(sx[b].norm_sqr() + sy[b].norm_sqr())))
        .unwrap_or(0);
    let w0 = env.bin_offset(line);
    let half = std::f64::consts::PI * settings.optical_filter_fwhm;
    for q in 0..n {
        if (env.bin_offset(q) - w0).abs() > half {
            sx[q] = C64::default();
            sy[q] = C64::default();
        }
    }
    tr.to_time_alloc(&mut sx);
    tr.to_time_alloc(&mut sy);

    let dt = env.sample_period;
    let mut s: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        let (x, y) = (sx[k], sy[k]);
        let c = x * y.conj();
        s[0][k] = x.norm_sqr() + y.norm_sqr();
        s[1][k] = x.norm_sqr() - y.norm_sqr();
        s[2][k] = 2.0 * c.re;
        s[3][k] = 2.0 * c.im;
    }
    if let Some(osnr_db) = settings.osnr_db {
        let ps = s[0].iter().sum::<f64>() / n as f64;
        let n_ase = ps / (2.0 * db_to_linear(osnr_db) * REFERENCE_BANDWIDTH);
        // complex white noise, per-sample variance N / dt split over re and im
        let normal = Normal::new(0.0, (0.5 * n_ase / dt).sqrt()).map_err(|e| invalid(e.to_string()))?;
        let mut r = rng::stream(seed, &[rng::label::DETECT]);
        for k in 0..n {
            let nx = C64::new(normal.sample(&mut r), normal.sample(&mut r));
            let ny = C64::new(normal.sample(&mut r), normal.sample(&mut r));
            let (x, y) = (sx[k], sy[k]);
            let bx = 2.0 * (x.conj() * nx).re;
            let by = 2.0 * (y.conj() * ny).re;
            let c = nx * y.conj() + x * ny.conj();
            s[0][k] += bx + by;
            s[1][k] += bx - by;
            s[2][k] += 2.0 * c.re;
            s[3][k] += 2.0 * c.im;
        }
    }
    lowpass_pair(&tr, &mut s, env.duration(), settings.electrical_cutoff);
    Ok(AnalogStokes { sample_period: dt, s })
}

// First-order low-pass, H = 1 / (1 + j w / w_c), applied circularly. Two real
// channels ride in one complex FFT since the impulse response is real.
fn lowpass_pair(tr: &SpectralTransform, s: &mut [Vec<f64>; 4], duration: f64, wc: f64) {
    let n = s[0].len();
    for pair in [(0, 1), (2, 3)] {
        let mut buf: Vec<C64> = (0..n).map(|k| C64::new(s[pair.0][k], s[pair.1][k])).collect();
        tr.to_spectrum(&mut buf);
        for (q, b) in buf.iter_mut().enumerate() {
            // bin q carries e^{-j w_q t}, i.e. angular frequency -w_q
            let w = -crate::field::bin_offset(q, n, duration);
            *b /= C64::new(1.0, w / wc);
        }
        tr.to_time_alloc(&mut buf);
        for k in 0..n {
            s[pair.0][k] = buf[k].re;
            s[pair.1][k] = buf[k].im;
        }
    }
}

impl AnalogStokes {
    /// Samples every sample period starting at grid index `offset`, through the ADC.
    pub fn sample(&self, settings: &PolarimeterSettings, offset: usize) -> Result<StokesTrace> {
        let n = self.s[0].len();
        let ratio = settings.sample_period / self.sample_period;
        let stride = ratio.round() as usize;
        if stride == 0 || (ratio - stride as f64).abs() > 1e-6 * ratio {
            return Err(invalid(format!(
                "sample period {} s is not a multiple of the envelope step {} s",
                settings.sample_period, self.sample_period
            )));
        }
        if offset >= stride {
            return Err(invalid("sampling offset must be below the decimation stride"));
        }
        let mean_s0 = self.s[0].iter().sum::<f64>() / n as f64;
        if !(mean_s0 > 0.0) {
            return Err(NldpError::Domain("no optical power at the polarimeter".into()));
        }
        let full_scale = 2.0 * mean_s0;
        let lsb = 2.0 * full_scale / (1u64 << settings.adc_bits) as f64;
        let quantize = |v: f64| (v / lsb).round().clamp(-full_scale / lsb, full_scale / lsb) * lsb;
        let mut clamped = 0;
        let mut samples = Vec::with_capacity(n / stride + 1);
        let mut k = offset;
        while k < n {
            let s0 = quantize(self.s[0][k]);
            let v = [quantize(self.s[1][k]), quantize(self.s[2][k]), quantize(self.s[3][k])];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if s0 <= 0.0 || norm <= 0.0 {
                clamped += 1;
            }
            let d = if norm > 0.0 { v.map(|c| c / norm) } else { [1.0, 0.0, 0.0] };
            samples.push(StokesVector::new(1.0, d[0], d[1], d[2]));
            k += stride;
        }
        Ok(StokesTrace { sample_period: settings.sample_period, samples, seed: 0, scenario: String::new(), clamped })
    }
}

/// Full detection chain with the sampling clock at grid index 0.
pub fn detect(env: &ComplexEnvelope, settings: &PolarimeterSettings, seed: u64) -> Result<StokesTrace> {
    let mut t = detect_analog(env, settings, seed)?.sample(settings, 0)?;
    t.seed = seed;
    Ok(t)
}

/// |S(t + tau_s) - S(t)| / tau_s over consecutive samples.
pub fn sop_speed_series(trace: &StokesTrace) -> Result<Vec<f64>> {
    if trace.samples.len() < 2 {
        return Err(invalid("SOP speed needs at least two samples"));
    }
    Ok(trace
        .samples
        .windows(2)
        .map(|w| {
            let d = [w[1].s1 - w[0].s1, w[1].s2 - w[0].s2, w[1].s3 - w[0].s3];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / trace.sample_period
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SopSpeedHistogram {
    /// rad/s
    pub bin_width: f64,
    pub bins: Vec<u64>,
    pub n_samples: u64,
    /// rad/s, from the raw values
    pub mean: f64,
    /// (rad/s)^2, population variance of the raw values
    pub variance: f64,
    pub overflow: u64,
    /// s, when known
    pub sample_period: Option<f64>,
}

impl SopSpeedHistogram {
    pub fn from_series(series: &[f64]) -> Result<Self> {
        Self::with_bins(series, DEFAULT_BIN_WIDTH, HISTOGRAM_BINS)
    }

    pub fn with_bins(series: &[f64], bin_width: f64, n_bins: usize) -> Result<Self> {
        if series.is_empty() {
            return Err(invalid("histogram of an empty series"));
        }
        if !(bin_width > 0.0) || n_bins == 0 {
            return Err(invalid("bin width and count must be positive"));
        }
        if series.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("SOP speeds must be finite and non-negative"));
        }
        let mut bins = vec![0u64; n_bins];
        let mut overflow = 0;
        for &v in series {
            let k = (v / bin_width).floor();
            let idx = if k >= n_bins as f64 {
                overflow += 1;
                n_bins - 1
            } else {
                k as usize
            };
            bins[idx] += 1;
        }
        let (mean, variance) = mean_variance(series);
        Ok(Self { bin_width, bins, n_samples: series.len() as u64, mean, variance, overflow, sample_period: None })
    }

    pub fn lower_edge(&self, k: usize) -> f64 {
        k as f64 * self.bin_width
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_index,lower_edge_rad_s,count")?;
        for (k, c) in self.bins.iter().enumerate() {
            writeln!(w, "{},{},{}", k, self.lower_edge(k), c)?;
        }
        writeln!(w, "# mean={}", self.mean)?;
        writeln!(w, "# variance={}", self.variance)?;
        writeln!(w, "# overflow={}", self.overflow)?;
        if let Some(t) = self.sample_period {
            writeln!(w, "# sample_period_s={t}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: &str| NldpError::Format(m.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty histogram file"))??;
        if header.trim() != "bin_index,lower_edge_rad_s,count" {
            return Err(bad("unexpected histogram header"));
        }
        let mut edges = Vec::new();
        let mut bins = Vec::new();
        let (mut mean, mut variance, mut overflow, mut tau) = (None, None, None, None);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                let (k, v) = c.trim().split_once('=').ok_or_else(|| bad("malformed comment line"))?;
                let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("bad number in comment"));
                match k.trim() {
                    "mean" => mean = Some(num(v)?),
                    "variance" => variance = Some(num(v)?),
                    "overflow" => overflow = Some(v.trim().parse::<u64>().map_err(|_| bad("bad overflow count"))?),
                    "sample_period_s" => tau = Some(num(v)?),
                    _ => {}
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad("histogram rows need three columns"));
            }
            let idx: usize = f[0].trim().parse().map_err(|_| bad("bad bin index"))?;
            if idx != bins.len() {
                return Err(bad("bin indices must be consecutive from 0"));
            }
            edges.push(f[1].trim().parse::<f64>().map_err(|_| bad("bad bin edge"))?);
            bins.push(f[2].trim().parse::<u64>().map_err(|_| bad("bad bin count"))?);
        }
        if bins.len() < 2 {
            return Err(bad("histogram needs at least two bins"));
        }
        let bin_width = edges[1] - edges[0];
        Ok(Self {
            bin_width,
            n_samples: bins.iter().sum(),
            bins,
            mean: mean.ok_or_else(|| bad("missing # mean="))?,
            variance: variance.ok_or_else(|| bad("missing # variance="))?,
            overflow: overflow.ok_or_else(|| bad("missing # overflow="))?,
            sample_period: tau,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub fn histogram(series: &[f64]) -> Result<SopSpeedHistogram> {
    SopSpeedHistogram::from_series(series)
}

/// Two-pass mean and population variance.
pub fn mean_variance(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDifference {
    /// (rad/s)^2
    pub value: f64,
    /// true when the probe variance came out below the reference
    pub below_floor: bool,
}

pub fn variance_difference(probe_var: f64, reference_var: f64) -> Result<VarianceDifference> {
    if !probe_var.is_finite() || !reference_var.is_finite() || probe_var < 0.0 || reference_var < 0.0 {
        return Err(invalid("variances must be finite and non-negative"));
    }
    let value = probe_var - reference_var;
    Ok(VarianceDifference { value, below_floor: value < 0.0 })
}

/// sigma^2_NLDP = sigma^2_probe - sigma^2_reference for histograms taken with matched settings.
pub fn variance_subtract(probe: &SopSpeedHistogram, reference: &SopSpeedHistogram) -> Result<VarianceDifference> {
    if (probe.bin_width - reference.bin_width).abs() > 1e-9 * probe.bin_width {
        return Err(invalid("histograms use different bin widths"));
    }
    if let (Some(a), Some(b)) = (probe.sample_period, reference.sample_period) {
        if (a - b).abs() > 1e-12 * a {
            return Err(invalid("histograms use different sample periods"));
        }
    }
    variance_difference(probe.variance, reference.variance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_value_lands_in_next_bin() {
        let h = histogram(&[DEFAULT_BIN_WIDTH]).unwrap();
        assert_eq!(h.bins[1], 1);
        let h = histogram(&[0.0; 10]).unwrap();
        assert_eq!(h.bins[0], 10);
        assert_eq!(h.variance, 0.0);
    }

    #[test]
    fn overflow_goes_to_last_bin() {
        let h = histogram(&[1e12, 0.0]).unwrap();
        assert_eq!(h.bins[HISTOGRAM_BINS - 1], 1);
        assert_eq!(h.overflow, 1);
        assert_eq!(h.n_samples, 2);
    }

    #[test]
    fn antipodal_jump() {
        let t = StokesTrace::new(
            10e-9,
            vec![StokesVector::new(1.0, 1.0, 0.0, 0.0), StokesVector::new(1.0, -1.0, 0.0, 0.0)],
        );
        let v = sop_speed_series(&t).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0] - 2e8).abs() < 1e-6);
    }

    #[test]
    fn subtraction_examples() {
        let d = variance_difference(25.0, 9.0).unwrap();
        assert_eq!(d.value, 16.0);
        assert!(!d.below_floor);
        assert!(variance_difference(1.0, 2.0).unwrap().below_floor);
    }

    #[test]
    fn mismatched_histograms_rejected() {
        let a = histogram(&[1.0, 2.0]).unwrap();
        let mut b = a.clone();
        b.bin_width *= 2.0;
        assert!(variance_subtract(&a, &b).is_err());
        let mut c = a.clone();
        c.sample_period = Some(10e-9);
        let mut d = a.clone();
        d.sample_period = Some(20e-9);
        assert!(variance_subtract(&c, &d).is_err());
    }

    #[test]
    fn bad_settings() {
        let s = PolarimeterSettings { adc_bits: 30, ..Default::default() };
        assert!(s.validate().is_err());
        let s = PolarimeterSettings { sample_period: 0.0, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
