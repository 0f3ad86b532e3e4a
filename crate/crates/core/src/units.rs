//! Unit conversions. Everything inside the crate is SI; these helpers sit at
//! the config boundary.

use std::f64::consts::PI;

pub const PLANCK: f64 = 6.626_070_15e-34;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    linear_to_db(w / 1e-3)
}

/// dB/km -> 1/m field-power attenuation coefficient.
pub fn db_per_km_to_alpha(db_km: f64) -> f64 {
    db_km * 10f64.ln() / 10.0 / 1e3
}

pub fn alpha_to_db_per_km(alpha: f64) -> f64 {
    alpha * 1e3 * 10.0 / 10f64.ln()
}

/// ps^2/km -> s^2/m
pub fn ps2_per_km(x: f64) -> f64 {
    x * 1e-24 / 1e3
}

/// 1/(W km) -> 1/(W m)
pub fn per_w_km(x: f64) -> f64 {
    x / 1e3
}

/// ps/sqrt(km) -> s/sqrt(m)
pub fn ps_per_sqrt_km(x: f64) -> f64 {
    x * 1e-12 / 1e3f64.sqrt()
}

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}
