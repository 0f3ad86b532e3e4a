//! First-order perturbation theory of the probe distortion and the resulting
//! SOP-speed statistics.

mod phasor;
mod spectrum;

pub use phasor::*;
pub use spectrum::*;

use serde::{Deserialize, Serialize};

/// Polarimeter electrical bandwidth seen by the theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarimeterBand {
    /// 3-dB cutoff of the first-order low-pass, rad/s
    pub omega_e: f64,
}

impl Default for PolarimeterBand {
    fn default() -> Self {
        Self { omega_e: 2.0 * std::f64::consts::PI * 30e6 }
    }
}
