use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nldp_core::polarization::*;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn close(a: &JonesMatrix, b: &JonesMatrix, tol: f64) -> bool {
    (0..2).all(|i| (0..2).all(|j| (a.m[i][j] - b.m[i][j]).norm() < tol))
}

#[test]
fn waveplate_examples() {
    assert!(close(&waveplate_matrix(0.0, 0.0).unwrap(), &JonesMatrix::identity(), 1e-15));
    let m = waveplate_matrix(PI / 2.0, 0.0).unwrap();
    let swap = JonesMatrix::new(c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0));
    assert!(close(&m, &swap, 1e-15));
    let v = m.apply(JonesVector::x_pol());
    assert!(v.x.norm() < 1e-15 && (v.y - c(-1.0, 0.0)).norm() < 1e-15);
    assert!(waveplate_matrix(0.3, 1.2).unwrap().unitarity_error() < 1e-12);
}

#[test]
fn stokes_examples() {
    let s = jones_to_stokes(JonesVector::new(c(1.0, 0.0), c(0.0, 0.0)));
    assert_eq!((s.s0, s.s1, s.s2, s.s3), (1.0, 1.0, 0.0, 0.0));
    let s = jones_to_stokes(JonesVector::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)));
    assert!((s.s0 - 1.0).abs() < 1e-15 && s.s1.abs() < 1e-15 && (s.s2 - 1.0).abs() < 1e-15 && s.s3.abs() < 1e-15);
    let s = jones_to_stokes(JonesVector::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)));
    // s3 = 2 Im(ex ey*) with ex ey* = -j/2
    assert!((s.s0 - 1.0).abs() < 1e-15 && s.s1.abs() < 1e-15 && s.s2.abs() < 1e-15);
    assert!((s.s3 + 1.0).abs() < 1e-15);
    let s = jones_to_stokes(JonesVector::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)));
    assert!((s.s3 - 1.0).abs() < 1e-15);
}

#[test]
fn dop_examples() {
    let a = StokesVector::new(1.0, 1.0, 0.0, 0.0);
    let b = StokesVector::new(1.0, -1.0, 0.0, 0.0);
    assert!((dop(&vec![a; 10]).unwrap() - 1.0).abs() < 1e-15);
    assert!(dop(&[a, b, a, b]).unwrap().abs() < 1e-15);
    assert!(dop(&[]).is_err());
}

#[test]
fn haar_examples() {
    let u = haar_random_rotation(42);
    assert!(u.unitarity_error() < 1e-12);
    assert!((u.det() - c(1.0, 0.0)).norm() < 1e-12);
    assert_eq!(haar_random_rotation(42), u);
    assert_ne!(haar_random_rotation(43), u);
}

#[test]
fn haar_isotropy() {
    let v = JonesVector::new(c(0.6, 0.1), c(0.3, -0.7));
    let s: Vec<StokesVector> = (0..100_000u64).map(|k| jones_to_stokes(haar_random_rotation(k).apply(v))).collect();
    assert!(dop(&s).unwrap() < 0.02);
}

#[test]
fn isotropic_samples_are_unpolarized() {
    use rand::SeedableRng;
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let s: Vec<StokesVector> = (0..1_000_000)
        .map(|_| jones_to_stokes(haar_rotation_from(&mut r).apply(JonesVector::x_pol())))
        .collect();
    assert!(dop(&s).unwrap() < 0.01);
}

fn jones() -> impl Strategy<Value = JonesVector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, d, e)| JonesVector::new(c(a, b), c(d, e)))
}

proptest! {
    #[test]
    fn waveplates_are_special_unitary(xi in -10.0..10.0f64, zeta in -10.0..10.0f64) {
        let m = waveplate_matrix(xi, zeta).unwrap();
        prop_assert!(m.unitarity_error() < 1e-12);
        prop_assert!((m.det() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stokes_preserves_power(v in jones()) {
        let s = jones_to_stokes(v);
        prop_assert_eq!(s.s0, v.power());
        prop_assert!((s.vector_norm() - s.s0).abs() <= 1e-9 * s.s0.max(1e-300));
    }

    #[test]
    fn cascades_conserve_power(angles in prop::collection::vec((-7.0..7.0f64, -7.0..7.0f64), 1..40), v in jones()) {
        let m = angles.iter().fold(JonesMatrix::identity(), |acc, &(x, z)| waveplate_matrix(x, z).unwrap() * acc);
        prop_assert!(m.unitarity_error() < 1e-12);
        prop_assert!((m.apply(v).power() - v.power()).abs() < 1e-12);
    }

    #[test]
    fn dop_is_rotation_invariant(vs in prop::collection::vec(jones(), 2..30), seed in any::<u64>()) {
        prop_assume!(vs.iter().map(|v| v.power()).sum::<f64>() > 1e-3);
        let u = haar_random_rotation(seed);
        let a: Vec<_> = vs.iter().map(|v| jones_to_stokes(*v)).collect();
        let b: Vec<_> = vs.iter().map(|v| jones_to_stokes(u.apply(*v))).collect();
        prop_assert!((dop(&a).unwrap() - dop(&b).unwrap()).abs() < 1e-9);
    }
}
