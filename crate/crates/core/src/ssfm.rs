//! Split-step integration of the coupled NLS equations through waveplate chains.
//!
//! Per nonlinear step: dispersion and loss are applied per frequency bin, the
//! Kerr phase per time sample. Dispersion commutes with the (per-bin) plate
//! rotation, so consecutive half steps and the plate rotation are merged into
//! one spectral pass.

use num_complex::Complex64 as C64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NldpError, Result};
use crate::field::{bin_offset, ComplexEnvelope, SpectralTransform};
use crate::link::{kicker_rotation, repeater_gain, FiberParams, LinkConfig, Waveplate, WaveplateRealization};
use crate::polarization::JonesMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    /// rad
    pub max_nl_phase_per_step: f64,
    pub min_steps_per_plate: usize,
    pub include_antisymmetric_term: bool,
    /// the x* y^2 four-wave term; integrated with RK4 when enabled
    pub include_coherent_coupling_term: bool,
    /// occupied spectrum must stay below this fraction of Nyquist
    pub guard_fraction: f64,
    /// power fraction allowed above the guard before aborting
    pub alias_tolerance: f64,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            max_nl_phase_per_step: 0.05,
            min_steps_per_plate: 1,
            include_antisymmetric_term: true,
            include_coherent_coupling_term: false,
            guard_fraction: 0.8,
            alias_tolerance: 1e-6,
        }
    }
}

impl PropagationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_nl_phase_per_step > 0.0 && self.max_nl_phase_per_step <= 0.1) {
            return Err(invalid("max_nl_phase_per_step must be in (0, 0.1]"));
        }
        if self.min_steps_per_plate == 0 {
            return Err(invalid("min_steps_per_plate must be at least 1"));
        }
        if !(self.guard_fraction > 0.0 && self.guard_fraction <= 1.0) {
            return Err(invalid("guard_fraction must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Dual-polarization field held as spectral amplitudes (time = sum_q S_q e^{-j w_q t}).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub sx: Vec<C64>,
    pub sy: Vec<C64>,
    pub duration: f64,
    pub center_frequency: f64,
}

impl SpectralField {
    pub fn from_envelope(env: &ComplexEnvelope, tr: &SpectralTransform) -> Self {
        let mut sx = env.ex.clone();
        let mut sy = env.ey.clone();
        tr.to_spectrum(&mut sx);
        tr.to_spectrum(&mut sy);
        Self { sx, sy, duration: env.duration(), center_frequency: env.center_frequency }
    }

    pub fn to_envelope(&self, tr: &SpectralTransform) -> ComplexEnvelope {
        let mut ex = self.sx.clone();
        let mut ey = self.sy.clone();
        tr.to_time_alloc(&mut ex);
        tr.to_time_alloc(&mut ey);
        let n = ex.len();
        ComplexEnvelope { sample_period: self.duration / n as f64, ex, ey, center_frequency: self.center_frequency }
    }

    pub fn len(&self) -> usize {
        self.sx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sx.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.sx.iter().chain(&self.sy).map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&mut self, k: f64) {
        self.sx.iter_mut().chain(self.sy.iter_mut()).for_each(|a| *a *= k);
    }

    pub fn rotate(&mut self, u: &JonesMatrix) {
        for (x, y) in self.sx.iter_mut().zip(self.sy.iter_mut()) {
            let (a, b) = (*x, *y);
            *x = u.m[0][0] * a + u.m[0][1] * b;
            *y = u.m[1][0] * a + u.m[1][1] * b;
        }
    }

    pub fn offset(&self, q: usize) -> f64 {
        bin_offset(q, self.len(), self.duration)
    }

    /// Fraction of the power sitting above `guard` times Nyquist.
    pub fn out_of_band_fraction(&self, guard: f64) -> f64 {
        let n = self.len();
        let limit = guard * (n / 2) as f64;
        let mut above = 0.0;
        let mut total = 0.0;
        for q in 0..n {
            let qs = if q < n.div_ceil(2) { q as f64 } else { n as f64 - q as f64 };
            let p = self.sx[q].norm_sqr() + self.sy[q].norm_sqr();
            total += p;
            if qs > limit {
                above += p;
            }
        }
        if total > 0.0 {
            above / total
        } else {
            0.0
        }
    }
}

/// Reusable workspace for one propagation worker.
pub struct Propagator {
    tr: SpectralTransform,
    scratch: Vec<C64>,
    tx: Vec<C64>,
    ty: Vec<C64>,
    peak: f64,
    /// nonlinear steps taken so far
    pub steps_taken: u64,
}

impl Propagator {
    pub fn new(n: usize) -> Self {
        let tr = SpectralTransform::new(n);
        let scratch = vec![C64::default(); tr.scratch_len()];
        Self { tr, scratch, tx: vec![C64::default(); n], ty: vec![C64::default(); n], peak: f64::NAN, steps_taken: 0 }
    }

    pub fn transform(&self) -> &SpectralTransform {
        &self.tr
    }

    fn check_alias(&self, f: &SpectralField, settings: &PropagationSettings, location: &str) -> Result<()> {
        let frac = f.out_of_band_fraction(settings.guard_fraction);
        if frac > settings.alias_tolerance {
            return Err(NldpError::Aliasing { fraction: frac, location: location.to_string() });
        }
        Ok(())
    }

    /// Propagate one span in place.
    pub fn span(
        &mut self,
        f: &mut SpectralField,
        span: &WaveplateRealization,
        params: &FiberParams,
        settings: &PropagationSettings,
    ) -> Result<()> {
        settings.validate()?;
        params.validate()?;
        if f.len() != self.tr.len() {
            return Err(invalid("field length does not match the propagator"));
        }
        self.check_alias(f, settings, "span input")?;
        if params.gamma == 0.0 {
            linear_span(f, span, params);
            return Ok(());
        }
        self.peak = f64::NAN;
        // pending linear length and plate rotation not yet applied
        let mut pending = 0.0;
        let mut pending_plate: Option<&Waveplate> = None;
        for plate in &span.plates {
            if self.peak.is_nan() {
                self.measure_peak(f);
            }
            let phase = params.gamma * self.peak * plate.length;
            let steps = settings
                .min_steps_per_plate
                .max((phase / settings.max_nl_phase_per_step).ceil() as usize);
            let h = plate.length / steps as f64;
            for _ in 0..steps {
                pending += 0.5 * h;
                self.linear_pass(f, pending, pending_plate.take(), params);
                self.nonlinear_step(f, h, params, settings);
                pending = 0.5 * h;
            }
            pending_plate = Some(plate);
        }
        self.linear_pass(f, pending, pending_plate, params);
        self.check_alias(f, settings, "span output")?;
        Ok(())
    }

    // Peak power for step control before the first plate; later plates reuse
    // the peak seen by the previous nonlinear step.
    fn measure_peak(&mut self, f: &SpectralField) {
        self.tx.copy_from_slice(&f.sx);
        self.ty.copy_from_slice(&f.sy);
        self.tr.to_time(&mut self.tx, &mut self.scratch);
        self.tr.to_time(&mut self.ty, &mut self.scratch);
        self.peak = self
            .tx
            .iter()
            .zip(&self.ty)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .fold(0.0, f64::max);
    }

    /// Dispersion and loss over length `d`, then the plate rotation if given.
    fn linear_pass(&self, f: &mut SpectralField, d: f64, plate: Option<&Waveplate>, params: &FiberParams) {
        let n = f.len();
        let dw = 2.0 * std::f64::consts::PI / f.duration;
        let loss = (-0.5 * params.alpha * d).exp();
        let c = 0.5 * params.beta2 * dw * dw * d;
        // quadratic phase by recurrence: f_{q+1} = f_q g_q, g_{q+1} = g_q w2
        let w2 = C64::from_polar(1.0, 2.0 * c);
        let mut g = C64::from_polar(1.0, c);
        let mut disp = C64::new(loss, 0.0);
        let pos_end = n.div_ceil(2);
        match plate {
            None => {
                for q in 0..=n / 2 {
                    if q < pos_end {
                        f.sx[q] *= disp;
                        f.sy[q] *= disp;
                    }
                    if q > 0 && n - q >= pos_end {
                        f.sx[n - q] *= disp;
                        f.sy[n - q] *= disp;
                    }
                    disp *= g;
                    g *= w2;
                }
            }
            Some(p) => {
                let (s, co) = p.xi.sin_cos();
                let r = C64::from_polar(1.0, 0.5 * p.dgd * dw);
                let rc = r.conj();
                let a0 = C64::from_polar(1.0, p.zeta);
                let mut ap = a0;
                let mut an = a0;
                let apply = |x: &mut C64, y: &mut C64, k: C64, a: C64| {
                    let (u, v) = (*x, *y);
                    *x = k * a * (co * u + s * v);
                    *y = k * a.conj() * (co * v - s * u);
                };
                for q in 0..=n / 2 {
                    if q < pos_end {
                        apply(&mut f.sx[q], &mut f.sy[q], disp, ap);
                    }
                    // for even n the Nyquist bin counts as a negative offset
                    if q > 0 && n - q >= pos_end {
                        let (a, b) = (&mut f.sx[n - q], &mut f.sy[n - q]);
                        apply(a, b, disp, an);
                    }
                    disp *= g;
                    g *= w2;
                    ap *= r;
                    an *= rc;
                }
            }
        }
    }

    fn nonlinear_step(&mut self, f: &mut SpectralField, h: f64, params: &FiberParams, settings: &PropagationSettings) {
        let n = f.len();
        self.steps_taken += 1;
        self.tx.copy_from_slice(&f.sx);
        self.ty.copy_from_slice(&f.sy);
        self.tr.to_time(&mut self.tx, &mut self.scratch);
        self.tr.to_time(&mut self.ty, &mut self.scratch);
        let gh = params.gamma * h;
        let ka = if settings.include_antisymmetric_term { 1.0 / 6.0 } else { 0.0 };
        let mut peak = 0.0f64;
        if settings.include_coherent_coupling_term {
            for (x, y) in self.tx.iter_mut().zip(self.ty.iter_mut()) {
                let (nx, ny) = rk4_kerr(*x, *y, gh, ka);
                *x = nx;
                *y = ny;
                peak = peak.max(x.norm_sqr() + y.norm_sqr());
            }
        } else {
            for (x, y) in self.tx.iter_mut().zip(self.ty.iter_mut()) {
                let px = x.re * x.re + x.im * x.im;
                let py = y.re * y.re + y.im * y.im;
                let sym = 5.0 / 6.0 * (px + py);
                let anti = ka * (px - py);
                peak = if px + py > peak { px + py } else { peak };
                *x *= cis(gh * (sym + anti));
                *y *= cis(gh * (sym - anti));
            }
        }
        self.peak = peak;
        self.tr.to_spectrum_unscaled(&mut self.tx, &mut self.scratch);
        self.tr.to_spectrum_unscaled(&mut self.ty, &mut self.scratch);
        let k = 1.0 / n as f64;
        for (d, s) in f.sx.iter_mut().zip(&self.tx) {
            *d = s * k;
        }
        for (d, s) in f.sy.iter_mut().zip(&self.ty) {
            *d = s * k;
        }
    }
}

/// e^{j phi}; a short Taylor series is exact to rounding for the small
/// per-step phases used here.
#[inline(always)]
fn cis(phi: f64) -> C64 {
    if phi.abs() > 0.05 {
        return C64::from_polar(1.0, phi);
    }
    let p2 = phi * phi;
    // Horner form with reciprocal factorial ratios (no divisions in the hot loop)
    let c = 1.0 - p2 * 0.5 * (1.0 - p2 * (1.0 / 12.0) * (1.0 - p2 * (1.0 / 30.0)));
    let s = phi * (1.0 - p2 * (1.0 / 6.0) * (1.0 - p2 * (1.0 / 20.0) * (1.0 - p2 * (1.0 / 42.0))));
    C64::new(c, s)
}

fn kerr_rhs(x: C64, y: C64, ka: f64) -> (C64, C64) {
    let px = x.norm_sqr();
    let py = y.norm_sqr();
    let sym = 5.0 / 6.0 * (px + py);
    let anti = ka * (px - py);
    let j = C64::new(0.0, 1.0);
    (
        j * ((sym + anti) * x + x.conj() * y * y / 3.0),
        j * ((sym - anti) * y + y.conj() * x * x / 3.0),
    )
}

fn rk4_kerr(x: C64, y: C64, gh: f64, ka: f64) -> (C64, C64) {
    let (k1x, k1y) = kerr_rhs(x, y, ka);
    let (k2x, k2y) = kerr_rhs(x + k1x * (0.5 * gh), y + k1y * (0.5 * gh), ka);
    let (k3x, k3y) = kerr_rhs(x + k2x * (0.5 * gh), y + k2y * (0.5 * gh), ka);
    let (k4x, k4y) = kerr_rhs(x + k3x * gh, y + k3y * gh, ka);
    (
        x + (k1x + 2.0 * k2x + 2.0 * k3x + k4x) * (gh / 6.0),
        y + (k1y + 2.0 * k2y + 2.0 * k3y + k4y) * (gh / 6.0),
    )
}

/// gamma = 0: every occupied bin sees its own chain matrix. Bins holding only
/// transform round-off (below 1e-26 of the total power) are cleared instead.
fn linear_span(f: &mut SpectralField, span: &WaveplateRealization, params: &FiberParams) {
    let l = span.length();
    let loss = (-0.5 * params.alpha * l).exp();
    let floor = 1e-26 * f.power();
    for q in 0..f.len() {
        let (x, y) = (f.sx[q], f.sy[q]);
        if x.norm_sqr() + y.norm_sqr() <= floor {
            f.sx[q] = C64::default();
            f.sy[q] = C64::default();
            continue;
        }
        let w = f.offset(q);
        let u = span.jones_at(w);
        let k = C64::from_polar(loss, 0.5 * params.beta2 * w * w * l);
        f.sx[q] = k * (u.m[0][0] * x + u.m[0][1] * y);
        f.sy[q] = k * (u.m[1][0] * x + u.m[1][1] * y);
    }
}

/// Propagate an envelope through one span.
pub fn propagate_span(
    env: &ComplexEnvelope,
    span: &WaveplateRealization,
    params: &FiberParams,
    settings: &PropagationSettings,
) -> Result<ComplexEnvelope> {
    let mut p = Propagator::new(env.len());
    let mut f = SpectralField::from_envelope(env, p.transform());
    p.span(&mut f, span, params, settings)?;
    Ok(f.to_envelope(p.transform()))
}

/// Repeater stage applied after every span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeaterStage {
    /// W
    pub target_power: f64,
    /// W/Hz per polarization, None when ASE is off
    pub ase_psd_per_pol: Option<f64>,
    /// gain band edge, rad/s; bins beyond it are dropped (None keeps everything)
    pub band_edge: Option<f64>,
    pub seed: u64,
}

impl RepeaterStage {
    pub fn for_link(link: &LinkConfig, params: &FiberParams) -> Self {
        Self {
            target_power: link.p_rep,
            ase_psd_per_pol: link.repeater_ase_enabled.then(|| link.ase_psd_per_pol(params)),
            band_edge: None,
            seed: link.seed,
        }
    }
}

/// Flat gain back to the target power, then the gain-band edge, then ASE inside the band.
pub fn amplify(f: &mut SpectralField, stage: &RepeaterStage, span_index: u64) -> Result<f64> {
    let g = repeater_gain(f.power(), stage.target_power)?;
    f.scale(g.sqrt());
    if let Some(edge) = stage.band_edge {
        for q in 0..f.len() {
            if f.offset(q).abs() > edge {
                f.sx[q] = C64::default();
                f.sy[q] = C64::default();
            }
        }
    }
    if let Some(psd) = stage.ase_psd_per_pol {
        // each bin is 1/T wide
        let var = psd / f.duration;
        let normal = Normal::new(0.0, (0.5 * var).sqrt()).map_err(|e| invalid(e.to_string()))?;
        let mut r = rng::stream(stage.seed, &[rng::label::REPEATER_ASE, span_index]);
        let edge = stage.band_edge.unwrap_or(f64::INFINITY);
        for q in 0..f.len() {
            if f.offset(q).abs() <= edge {
                f.sx[q] += C64::new(normal.sample(&mut r), normal.sample(&mut r));
                f.sy[q] += C64::new(normal.sample(&mut r), normal.sample(&mut r));
            }
        }
    }
    Ok(g)
}

fn check_spans(link: &LinkConfig, spans: &[WaveplateRealization]) -> Result<()> {
    link.validate()?;
    if spans.is_empty() || spans.iter().any(|s| s.plates.is_empty()) {
        return Err(invalid("need at least one non-empty span realization"));
    }
    Ok(())
}

fn kick(link: &LinkConfig, done: usize, fields: &mut [&mut SpectralField]) {
    if link.kicker_enabled && done.is_multiple_of(link.spans_per_circulation) {
        let u = kicker_rotation(link.seed, (done / link.spans_per_circulation) as u64);
        for f in fields.iter_mut() {
            f.rotate(&u);
        }
    }
}

/// Propagate through `link.n_spans` spans (reusing `spans` cyclically, as in a loop),
/// returning the field after each span count listed in `taps`.
pub fn propagate_link_tapped(
    env: &ComplexEnvelope,
    link: &LinkConfig,
    spans: &[WaveplateRealization],
    params: &FiberParams,
    settings: &PropagationSettings,
    stage: &RepeaterStage,
    taps: &[usize],
) -> Result<Vec<(usize, ComplexEnvelope)>> {
    check_spans(link, spans)?;
    let mut p = Propagator::new(env.len());
    let mut f = SpectralField::from_envelope(env, p.transform());
    let mut out = Vec::new();
    for s in 0..link.n_spans {
        let span = &spans[s % spans.len()];
        p.span(&mut f, span, params, settings)
            .map_err(|e| with_context(e, &format!("span {}", s + 1)))?;
        amplify(&mut f, stage, s as u64)?;
        let done = s + 1;
        kick(link, done, &mut [&mut f]);
        if taps.contains(&done) {
            out.push((done, f.to_envelope(p.transform())));
        }
    }
    Ok(out)
}

/// N_s x (span, repeater restoring P_Rep, kicker at circulation ends).
pub fn propagate_link(
    env: &ComplexEnvelope,
    link: &LinkConfig,
    spans: &[WaveplateRealization],
    params: &FiberParams,
    settings: &PropagationSettings,
) -> Result<ComplexEnvelope> {
    let stage = RepeaterStage::for_link(link, params);
    let mut v = propagate_link_tapped(env, link, spans, params, settings, &stage, &[link.n_spans])?;
    Ok(v.pop().expect("final tap").1)
}

/// Probe-resolved propagation. The fields loading + probe and loading - probe
/// are propagated side by side; half their difference is the probe together
/// with everything odd in the probe amplitude (its first-order perturbation
/// included), half their sum is the loading. At each repeater the loading part
/// is cleared inside `|w| < gap_edge`, which keeps the loading gap as clean as
/// in a strongly dispersive link where gap-filling four-wave mixing is phase
/// mismatched. Taps return the probe part.
#[allow(clippy::too_many_arguments)]
pub fn propagate_link_differential(
    loading: &ComplexEnvelope,
    probe: &ComplexEnvelope,
    link: &LinkConfig,
    spans: &[WaveplateRealization],
    params: &FiberParams,
    settings: &PropagationSettings,
    stage: &RepeaterStage,
    gap_edge: Option<f64>,
    taps: &[usize],
) -> Result<Vec<(usize, ComplexEnvelope)>> {
    check_spans(link, spans)?;
    if loading.len() != probe.len() {
        return Err(invalid("loading and probe envelopes differ in length"));
    }
    let mut p = Propagator::new(loading.len());
    let l = SpectralField::from_envelope(loading, p.transform());
    let d = SpectralField::from_envelope(probe, p.transform());
    let mut plus = l.clone();
    let mut minus = l;
    for q in 0..plus.len() {
        plus.sx[q] += d.sx[q];
        plus.sy[q] += d.sy[q];
        minus.sx[q] -= d.sx[q];
        minus.sy[q] -= d.sy[q];
    }
    let mut out = Vec::new();
    for s in 0..link.n_spans {
        let span = &spans[s % spans.len()];
        for f in [&mut plus, &mut minus] {
            p.span(f, span, params, settings)
                .map_err(|e| with_context(e, &format!("span {}", s + 1)))?;
        }
        // one gain for both copies so their difference stays the probe
        let g = repeater_gain(0.5 * (plus.power() + minus.power()), stage.target_power)?;
        let no_gain = RepeaterStage { target_power: 1.0, ..*stage };
        for f in [&mut plus, &mut minus] {
            f.scale(g.sqrt());
            let pw = f.power();
            amplify(f, &RepeaterStage { target_power: pw, ..no_gain }, s as u64)?;
        }
        if let Some(edge) = gap_edge {
            for q in 0..plus.len() {
                if plus.offset(q).abs() < edge {
                    let dx = 0.5 * (plus.sx[q] - minus.sx[q]);
                    let dy = 0.5 * (plus.sy[q] - minus.sy[q]);
                    plus.sx[q] = dx;
                    plus.sy[q] = dy;
                    minus.sx[q] = -dx;
                    minus.sy[q] = -dy;
                }
            }
        }
        let done = s + 1;
        kick(link, done, &mut [&mut plus, &mut minus]);
        if taps.contains(&done) {
            let mut diff = plus.clone();
            for q in 0..diff.len() {
                diff.sx[q] = 0.5 * (plus.sx[q] - minus.sx[q]);
                diff.sy[q] = 0.5 * (plus.sy[q] - minus.sy[q]);
            }
            out.push((done, diff.to_envelope(p.transform())));
        }
    }
    Ok(out)
}

fn with_context(e: NldpError, ctx: &str) -> NldpError {
    match e {
        NldpError::Aliasing { fraction, location } => {
            NldpError::Aliasing { fraction, location: format!("{ctx}, {location}") }
        }
        other => other,
    }
}
