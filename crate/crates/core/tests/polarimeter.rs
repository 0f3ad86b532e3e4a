use std::f64::consts::PI;

use nldp_core::field::{comb_to_time_with_len, CombGrid, CombSpectrum, ComplexEnvelope};
use nldp_core::polarimeter::*;
use nldp_core::polarization::{haar_random_rotation, JonesMatrix, JonesVector, StokesVector, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

const F0: f64 = 193.9e12;
const N: usize = 4096;
const DURATION: f64 = 4.096e-6;

fn envelope(tones: &[(i64, JonesVector)]) -> ComplexEnvelope {
    let g = CombGrid::new(2.0 * PI / DURATION, -64, 64, F0).unwrap();
    let mut c = CombSpectrum::zeros(g);
    for &(n, v) in tones {
        c.set_tone(n, v).unwrap();
    }
    comb_to_time_with_len(&c, DURATION, N).unwrap()
}

/// a probe line with weak sidebands, so the SOP wanders
fn wandering() -> ComplexEnvelope {
    envelope(&[
        (0, JonesVector::new(C64::new(1e-2, 0.0), C64::new(0.0, 5e-3))),
        (3, JonesVector::new(C64::new(0.0, 1e-3), C64::new(2e-3, 0.0))),
        (-7, JonesVector::new(C64::new(1.5e-3, 0.5e-3), C64::new(-1e-3, 0.0))),
        (20, JonesVector::new(C64::new(0.0, 0.0), C64::new(1e-3, 1e-3))),
    ])
}

fn rotate(env: &ComplexEnvelope, u: &JonesMatrix) -> ComplexEnvelope {
    let mut out = env.clone();
    for k in 0..env.len() {
        let v = u.apply(env.sample(k));
        out.ex[k] = v.x;
        out.ey[k] = v.y;
    }
    out
}

fn analog_speeds(a: &AnalogStokes, stride: usize, tau: f64) -> Vec<f64> {
    let dir: Vec<[f64; 3]> = (0..a.s[0].len())
        .step_by(stride)
        .map(|k| {
            let v = [a.s[1][k], a.s[2][k], a.s[3][k]];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.map(|c| c / n)
        })
        .collect();
    dir.windows(2)
        .map(|w| ((0..3).map(|i| (w[1][i] - w[0][i]).powi(2)).sum::<f64>()).sqrt() / tau)
        .collect()
}

#[test]
fn static_field_without_noise_has_zero_speed() {
    let env = envelope(&[(0, JonesVector::new(C64::new(0.01, 0.0), C64::new(0.004, 0.003)))]);
    let t = detect(&env, &PolarimeterSettings::default(), 1).unwrap();
    assert_eq!(t.samples.len(), 410);
    assert!(!t.warning());
    let v = sop_speed_series(&t).unwrap();
    assert!(v.iter().all(|&x| x == 0.0));
}

#[test]
fn rotated_field_gives_the_same_histogram() {
    let env = wandering();
    let s = PolarimeterSettings { adc_bits: 24, ..Default::default() };
    let a = sop_speed_series(&detect(&env, &s, 1).unwrap()).unwrap();
    let b = sop_speed_series(&detect(&rotate(&env, &haar_random_rotation(7)), &s, 1).unwrap()).unwrap();
    assert!(a.iter().any(|&x| x > 1e4));
    let (ha, hb) = (histogram(&a).unwrap(), histogram(&b).unwrap());
    assert!((ha.variance / hb.variance - 1.0).abs() < 1e-3);
    let moved: u64 = ha.bins.iter().zip(&hb.bins).map(|(x, y)| x.abs_diff(*y)).sum();
    assert!(moved <= 4, "{moved} samples changed bins");
}

#[test]
fn noise_histogram_narrows_with_osnr() {
    let env = envelope(&[(0, JonesVector::new(C64::new(0.01, 0.0), C64::new(0.0, 0.0)))]);
    let vars: Vec<f64> = [10.0, 15.0, 20.0, 25.0]
        .iter()
        .map(|&o| {
            let s = PolarimeterSettings { osnr_db: Some(o), ..Default::default() };
            histogram(&sop_speed_series(&detect(&env, &s, 3).unwrap()).unwrap()).unwrap().variance
        })
        .collect();
    assert!(vars[0] > 0.0);
    assert!(vars.windows(2).all(|w| w[1] < w[0]), "{vars:?}");
}

#[test]
fn detection_is_seeded() {
    let env = wandering();
    let s = PolarimeterSettings { osnr_db: Some(15.0), ..Default::default() };
    assert_eq!(detect(&env, &s, 9).unwrap(), detect(&env, &s, 9).unwrap());
    assert_ne!(detect(&env, &s, 9).unwrap(), detect(&env, &s, 10).unwrap());
}

#[test]
fn short_envelope_rejected() {
    let env = envelope(&[(0, JonesVector::x_pol())]);
    let s = PolarimeterSettings { sample_period: 3e-6, ..Default::default() };
    assert!(detect(&env, &s, 1).is_err());
}

#[test]
fn series_examples() {
    let t = StokesTrace::new(10e-9, vec![StokesVector::new(1.0, 0.0, 0.0, 1.0); 5]);
    assert_eq!(sop_speed_series(&t).unwrap(), vec![0.0; 4]);
    assert!(sop_speed_series(&StokesTrace::new(10e-9, vec![StokesVector::new(1.0, 1.0, 0.0, 0.0)])).is_err());

    let t = StokesTrace::new(10e-9, vec![StokesVector::new(1.0, 1.0, 0.0, 0.0), StokesVector::new(1.0, -1.0, 0.0, 0.0)]);
    assert!((sop_speed_series(&t).unwrap()[0] - 2e8).abs() < 1e-6);

    for theta in [1e-4, 1e-3, 1e-2] {
        let s: Vec<_> = (0..20)
            .map(|k| {
                let a = theta * k as f64;
                StokesVector::new(1.0, a.cos(), 0.0, a.sin())
            })
            .collect();
        let v = sop_speed_series(&StokesTrace::new(10e-9, s)).unwrap();
        assert!(v.iter().all(|x| (x * 10e-9 / theta - 1.0).abs() < 1e-3));
    }
}

#[test]
fn histogram_examples() {
    let h = histogram(&[48.82e3]).unwrap();
    assert_eq!(h.bins[1], 1);
    assert_eq!(h.bins.len(), 1024);
    let h = histogram(&[0.0; 50]).unwrap();
    assert_eq!((h.bins[0], h.n_samples, h.variance), (50, 50, 0.0));
    assert!(histogram(&[]).is_err());
}

#[test]
fn rayleigh_variance() {
    let sigma = 3e6;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let v: Vec<f64> = (0..1_000_000).map(|_| f64::hypot(normal.sample(&mut r), normal.sample(&mut r))).collect();
    let h = histogram(&v).unwrap();
    assert_eq!(h.bins.iter().sum::<u64>(), h.n_samples);
    let expect = (4.0 - PI) / 2.0 * sigma * sigma;
    assert!((h.variance / expect - 1.0).abs() < 0.01);
    assert!((h.mean / (sigma * (PI / 2.0).sqrt()) - 1.0).abs() < 0.01);
}

#[test]
fn subtraction_examples() {
    assert_eq!(variance_difference(25.0, 9.0).unwrap().value, 16.0);
    let v = [1.0, 4.0, 2.5, 7.0];
    let a = histogram(&v).unwrap();
    let d = variance_subtract(&a, &a.clone()).unwrap();
    assert_eq!(d.value, 0.0);
    assert!(!d.below_floor);
    let neg = variance_difference(1.0, 3.0).unwrap();
    assert!(neg.below_floor && neg.value == -2.0);
    assert!(variance_difference(-1.0, 3.0).is_err());
    let b = SopSpeedHistogram::with_bins(&v, 1e3, 1024).unwrap();
    assert!(variance_subtract(&a, &b).is_err());
}

#[test]
fn trace_file_round_trip() {
    let samples: Vec<_> = (0..100).map(|k| StokesVector::new(1.0, (k as f64).cos(), (k as f64).sin(), 0.0)).collect();
    let t = StokesTrace::new(10e-9, samples);
    let mut buf = Vec::new();
    t.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"SOPT");
    assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 100 * 32);
    assert_eq!(StokesTrace::read_from(buf.as_slice()).unwrap(), t);
    assert!(StokesTrace::read_from(&buf[..buf.len() - 1]).is_err());
    assert!(StokesTrace::read_from(&b"XXXX\x01\0\0\0"[..]).is_err());
}

#[test]
fn histogram_file_round_trip() {
    let mut h = histogram(&[1.0, 5e4, 2e6, 7e7, 1e9]).unwrap();
    h.sample_period = Some(10e-9);
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("bin_index,lower_edge_rad_s,count\n"));
    assert!(text.contains("# mean=") && text.contains("# variance=") && text.contains("# overflow=2"));
    let back = SopSpeedHistogram::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.bins, h.bins);
    assert_eq!((back.mean, back.variance, back.overflow, back.sample_period), (h.mean, h.variance, h.overflow, h.sample_period));
    assert!((back.bin_width / h.bin_width - 1.0).abs() < 1e-12);
    assert!(SopSpeedHistogram::read_csv("a,b\n".as_bytes()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn speeds_are_unitary_invariant(seed in any::<u64>()) {
        let env = wandering();
        let s = PolarimeterSettings::default();
        let a = detect_analog(&env, &s, 1).unwrap();
        let b = detect_analog(&rotate(&env, &haar_random_rotation(seed)), &s, 1).unwrap();
        let (va, vb) = (analog_speeds(&a, 10, 10e-9), analog_speeds(&b, 10, 10e-9));
        let scale = va.iter().cloned().fold(0.0, f64::max);
        prop_assert!(va.iter().zip(&vb).all(|(x, y)| (x - y).abs() < 1e-9 * scale));
    }
}
