use std::f64::consts::PI;

use nldp_core::field::*;
use nldp_core::polarization::{dop, jones_to_stokes, JonesVector, StokesVector, C64};
use proptest::prelude::*;

const F0: f64 = 193.9e12;

fn band_grid(band_hz: f64, pitch_hz: f64) -> CombGrid {
    CombGrid::symmetric(2.0 * PI * pitch_hz, 2.0 * PI * band_hz, F0).unwrap()
}

#[test]
fn loading_power_bookkeeping() {
    // 5 THz band, 100 GHz gap at the center
    let g = band_grid(5e12, 10e9);
    let p = 0.123;
    let n = 100;
    let mean = (0..n)
        .map(|s| make_loading(p, g, F0, 2.0 * PI * 100e9, s).unwrap().total_power())
        .sum::<f64>()
        / n as f64;
    let expect = p * (1.0 - 0.1 / 5.0);
    assert!((mean / expect - 1.0).abs() < 0.02, "{mean} vs {expect}");
}

#[test]
fn gap_tones_are_zero() {
    let g = band_grid(200e9, 1e9);
    let c = make_loading(1e-3, g, F0, 2.0 * PI * 20e9, 4).unwrap();
    let (a, b) = c.gap.unwrap();
    assert!(b > a);
    for n in a..=b {
        assert_eq!(c.tone(n).unwrap().power(), 0.0);
    }
    assert!(make_loading(1e-3, g, F0, 2.0 * PI * 300e9, 4).is_err());
}

#[test]
fn loading_is_unpolarized() {
    let g = band_grid(2e12, 10e6);
    let c = make_loading(1.0, g, F0, 2.0 * PI * 1e9, 11).unwrap();
    let s: Vec<StokesVector> = c.tones().map(|(_, v)| jones_to_stokes(v)).collect();
    assert!(s.len() >= 100_000);
    assert!(dop(&s).unwrap() < 0.01);
}

#[test]
fn loading_scales_with_power() {
    let g = band_grid(100e9, 1e9);
    let a = make_loading(1e-3, g, F0, 2.0 * PI * 10e9, 2).unwrap();
    let b = make_loading(2e-3, g, F0, 2.0 * PI * 10e9, 2).unwrap();
    for ((_, x), (_, y)) in a.tones().zip(b.tones()) {
        assert!((y.power() / x.power() - 2.0).abs() < 1e-12);
    }
}

#[test]
fn loading_phasors_are_gaussian() {
    let g = band_grid(2e11, 10e6);
    let c = make_loading(1.0, g, F0, 2.0 * PI * 1e9, 21).unwrap();
    let v: Vec<f64> = c.tones().flat_map(|(_, t)| [t.x.re, t.x.im, t.y.re, t.y.im]).collect();
    assert!(v.len() >= 10_000);
    let m2 = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let m4 = v.iter().map(|x| x.powi(4)).sum::<f64>() / v.len() as f64;
    let k = m4 / (m2 * m2);
    assert!((k - 3.0).abs() < 0.15, "fourth-moment ratio {k}");
}

#[test]
fn probe_examples() {
    let g = band_grid(200e9, 1e9);
    let l = make_loading(1e-3, g, F0, 2.0 * PI * 20e9, 4).unwrap();
    let p = make_probe(0.302e-3, F0, JonesVector::x_pol(), &l).unwrap();
    let t = p.tone(0).unwrap();
    assert!((t.x.re - 0.302e-3f64.sqrt()).abs() < 1e-15 && t.y.norm() == 0.0);
    assert!((p.total_power() - 0.302e-3).abs() < 1e-18);

    let circ = JonesVector::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    let t = make_probe(1e-3, F0, circ, &l).unwrap().tone(0).unwrap();
    assert!((t.x.norm() - t.y.norm()).abs() < 1e-15);
    assert!(((t.y / t.x).arg() - PI / 2.0).abs() < 1e-12);

    // gap half-width is 10 GHz; 11 GHz lies in the loading
    assert!(make_probe(1e-3, F0 + 11e9, JonesVector::x_pol(), &l).is_err());
}

#[test]
fn single_tone_has_flat_envelope() {
    let g = CombGrid::new(2.0 * PI * 1e9, -4, 4, F0).unwrap();
    let mut c = CombSpectrum::zeros(g);
    c.set_tone(2, JonesVector::new(C64::new(0.3, 0.1), C64::new(0.0, 0.2))).unwrap();
    let e = comb_to_time(&c, g.period()).unwrap();
    let p0 = e.sample(0).power();
    assert!(e.ex.iter().zip(&e.ey).all(|(x, y)| (x.norm_sqr() + y.norm_sqr() - p0).abs() < 1e-14));
}

#[test]
fn two_tones_beat_at_their_spacing() {
    let g = CombGrid::new(2.0 * PI * 1e9, -8, 8, F0).unwrap();
    let mut c = CombSpectrum::zeros(g);
    c.set_tone(-1, JonesVector::x_pol()).unwrap();
    c.set_tone(2, JonesVector::x_pol()).unwrap();
    let e = comb_to_time_with_len(&c, g.period(), 64).unwrap();
    let p: Vec<f64> = e.ex.iter().map(|x| x.norm_sqr()).collect();
    // |1 + e^{-j 3 w t}|^2 = 2 + 2 cos(3 w t): exactly three beat periods per window
    for (k, v) in p.iter().enumerate() {
        let t = k as f64 * e.sample_period;
        let expect = 2.0 + 2.0 * (3.0 * g.pitch * t).cos();
        assert!((v - expect).abs() < 1e-12);
    }
}

#[test]
fn random_comb_parseval() {
    let g = CombGrid::new(2.0 * PI * 1e8, -512, 511, F0).unwrap();
    let c = make_loading(1e-2, g, F0, 0.0, 8).unwrap();
    let e = comb_to_time(&c, g.period()).unwrap();
    assert!((e.mean_power() / c.total_power() - 1.0).abs() < 1e-9);
}

#[test]
fn loading_envelope_is_unpolarized() {
    let g = band_grid(20e9, 100e3);
    let c = make_loading(1e-3, g, F0, 2.0 * PI * 100e6, 13).unwrap();
    let e = comb_to_time(&c, g.period()).unwrap();
    let s: Vec<StokesVector> = (0..e.len()).map(|k| jones_to_stokes(e.sample(k))).collect();
    assert!(dop(&s).unwrap() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn comb_round_trip(seed in any::<u64>(), half in 4i64..200, periods in 1usize..4) {
        let g = CombGrid::new(2.0 * PI * 5e7, -half, half, F0).unwrap();
        let c = make_loading(1e-3, g, F0, 0.0, seed).unwrap();
        let e = comb_to_time(&c, periods as f64 * g.period()).unwrap();
        let back = time_to_comb(&e, g).unwrap();
        let scale = c.total_power().sqrt();
        for (a, b) in c.ax.iter().chain(&c.ay).zip(back.ax.iter().chain(&back.ay)) {
            prop_assert!((a - b).norm() < 1e-9 * scale);
        }
    }
}
