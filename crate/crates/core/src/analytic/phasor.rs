use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::CombSpectrum;
use crate::link::{FiberParams, LinkConfig};
use crate::polarization::JonesVector;

/// Which span kernel to use for a single-span phasor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasorForm {
    /// Long-span limit with mismatch beta2 m l w^2.
    #[default]
    Asymptotic,
    /// Finite span, exact mismatch beta2 w^2 l (m - l/2) measured from the probe.
    Exact,
}

/// Perturbation at tone offset `l` from the probe caused by the G-wave centered
/// at `m_twice / 2` pitches from the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPhasor {
    pub l: i64,
    pub m_twice: i64,
    /// coefficient 4/3, polarization independent
    pub symmetric: JonesVector,
    /// coefficient 2/3 with diag(1, -1)
    pub antisymmetric: JonesVector,
    /// off-diagonal part of the 2/3 term, dropped by the first-order model
    pub cross: JonesVector,
}

impl PerturbationPhasor {
    pub fn m(&self) -> f64 {
        self.m_twice as f64 / 2.0
    }

    /// Symmetric plus antisymmetric branches.
    pub fn value(&self) -> JonesVector {
        self.symmetric + self.antisymmetric
    }

    pub fn scaled(&self, k: C64) -> Self {
        let s = |v: JonesVector| JonesVector::new(v.x * k, v.y * k);
        Self { symmetric: s(self.symmetric), antisymmetric: s(self.antisymmetric), cross: s(self.cross), ..*self }
    }
}

/// The probe tone: the single nonzero tone inside the comb's gap.
pub fn find_probe(comb: &CombSpectrum) -> Result<(i64, JonesVector)> {
    let (a, b) = comb.gap.ok_or_else(|| invalid("comb has no gap, cannot locate the probe"))?;
    let mut found = None;
    for n in a..=b {
        if let Some(v) = comb.tone(n) {
            if v.power() > 0.0 {
                if found.is_some() {
                    return Err(invalid("more than one tone inside the gap"));
                }
                found = Some((n, v));
            }
        }
    }
    found.ok_or_else(|| invalid("no probe tone inside the gap"))
}

/// Span kernel K such that the perturbation at span end is j gamma c G a0 K.
/// `probe` is the probe's tone index relative to the grid center; the output
/// phase refers to the grid center like the split-step field does.
pub fn span_kernel(l: i64, m_twice: i64, probe: i64, pitch: f64, params: &FiberParams, l0: f64, form: PhasorForm) -> C64 {
    let w2 = pitch * pitch;
    let l_f = l as f64;
    let m = m_twice as f64 / 2.0;
    let n_out = (probe + l) as f64;
    let k_l = 0.5 * params.beta2 * w2 * n_out * n_out;
    let out = C64::new(-0.5 * params.alpha * l0, k_l * l0).exp();
    match form {
        PhasorForm::Asymptotic => {
            let d = C64::new(-params.alpha, params.beta2 * m * l_f * w2);
            -out / d
        }
        PhasorForm::Exact => {
            let dk = params.beta2 * w2 * l_f * (m - l_f / 2.0);
            let d = C64::new(-params.alpha, dk);
            let grow = (d * l0).exp() - 1.0;
            out * grow / d
        }
    }
}

/// Single-span perturbation phasors of both branches.
///
/// `m_twice` must have the parity of `l` so that both beating tones
/// (m_twice +- l) / 2 are integers relative to the probe.
pub fn perturbation_phasor_span(
    comb: &CombSpectrum,
    l: i64,
    m_twice: i64,
    params: &FiberParams,
    l0: f64,
    form: PhasorForm,
) -> Result<PerturbationPhasor> {
    if (m_twice - l).rem_euclid(2) != 0 {
        return Err(invalid(format!("m_twice {m_twice} and l {l} must share parity")));
    }
    let (p, a0) = find_probe(comb)?;
    let n1 = p + (m_twice + l) / 2;
    let n2 = p + (m_twice - l) / 2;
    let t1 = comb.tone(n1).ok_or_else(|| invalid(format!("tone {n1} off the grid")))?;
    let t2 = comb.tone(n2).ok_or_else(|| invalid(format!("tone {n2} off the grid")))?;
    if !comb.grid.contains(p + l) {
        return Err(invalid("perturbation tone off the grid"));
    }
    let gxx = t1.x * t2.x.conj();
    let gyy = t1.y * t2.y.conj();
    let gxy = t1.x * t2.y.conj();
    let gyx = t1.y * t2.x.conj();
    let a_op = gxx + gyy;
    let d_op = gxx - gyy;
    let k = C64::new(0.0, params.gamma) * span_kernel(l, m_twice, p, comb.grid.pitch, params, l0, form);
    let c_sym = 4.0 / 3.0;
    let c_anti = 2.0 / 3.0;
    Ok(PerturbationPhasor {
        l,
        m_twice,
        symmetric: JonesVector::new(k * c_sym * a_op * a0.x, k * c_sym * a_op * a0.y),
        antisymmetric: JonesVector::new(k * c_anti * d_op * a0.x, -k * c_anti * d_op * a0.y),
        cross: JonesVector::new(k * c_anti * gxy * a0.y, k * c_anti * gyx * a0.x),
    })
}

/// sum_{n=1..N} e^{j theta n}
pub fn coherent_span_sum(theta: f64, n_spans: usize) -> C64 {
    (1..=n_spans).map(|n| C64::from_polar(1.0, theta * n as f64)).sum()
}

/// Multi-span phasor: the single-span phasor times sum_n e^{j beta2 l m w^2 L0 n}.
pub fn perturbation_link_sum(
    phasor: &PerturbationPhasor,
    link: &LinkConfig,
    params: &FiberParams,
    pitch: f64,
) -> PerturbationPhasor {
    let theta = params.beta2 * phasor.l as f64 * phasor.m() * pitch * pitch * link.span_length;
    phasor.scaled(coherent_span_sum(theta, link.n_spans))
}
