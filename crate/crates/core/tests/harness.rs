use nldp_core::harness::*;
use nldp_core::NldpError;
use rand::{Rng, SeedableRng};

/// One circulation, few members, cheap detection.
fn small() -> ScenarioConfig {
    ScenarioConfig {
        n_spans: 11,
        ensemble_size: 2,
        sampling_phases: 4,
        noise_draws: 1,
        ..ScenarioConfig::desk()
    }
}

#[test]
fn fit_examples() {
    let f = fit_linear(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    assert!(matches!(fit_linear(&[(1.0, 1.0)]), Err(NldpError::DegenerateFit(_))));
    assert!(matches!(fit_linear(&[(1.0, 1.0), (1.0, 2.0)]), Err(NldpError::DegenerateFit(_))));
}

#[test]
fn fit_recovers_noisy_slope() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<(f64, f64)> = (1..=20)
        .map(|k| {
            let x = k as f64 * 1000.0;
            (x, 3.0 * x * (1.0 + 0.05 * (2.0 * r.random::<f64>() - 1.0)))
        })
        .collect();
    let f = fit_linear(&pts).unwrap();
    assert!((f.slope / 3.0 - 1.0).abs() < 0.1);
    assert!(f.r2 > 0.95);
}

#[test]
fn config_errors() {
    let e = ScenarioConfig::from_toml_str("span_lenght_km = 93\n").unwrap_err();
    assert!(e.is_config_error());
    let e = ScenarioConfig::from_toml_str("mode = \"distance_sweep\"\ncirculations = []\n").unwrap_err();
    assert!(e.is_config_error());
    let e = ScenarioConfig::from_toml_str("mode = \"power_sweep\"\npower_offsets_db = []\n").unwrap_err();
    assert!(e.is_config_error());
    assert!(ScenarioConfig::from_toml_str("ensemble_size = 0\n").is_err());
    assert!(ScenarioConfig::from_toml_str("samples_per_window = 100\n").is_err());
    assert!(ScenarioConfig::load(std::path::Path::new("/nonexistent/x.toml")).unwrap_err().is_config_error());
}

#[test]
fn config_round_trip() {
    let c = ScenarioConfig { seed: 77, circulations: vec![2, 4], ..ScenarioConfig::desk() };
    assert_eq!(ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ScenarioConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn linear_probe_matches_reference() {
    let cfg = ScenarioConfig { gamma_per_w_per_km: 0.0, ensemble_size: 2, noise_draws: 256, sampling_phases: 20, ..small() };
    let r = run_comparative(&cfg).unwrap();
    let ratio = r.probe.variance / r.reference.variance;
    assert!((0.98..=1.02).contains(&ratio), "{ratio}");
}

#[test]
fn comparative_runs_are_reproducible() {
    let cfg = small();
    let a = run_comparative(&cfg).unwrap();
    let b = run_comparative(&cfg).unwrap();
    assert_eq!(a, b);
    assert!((a.probe_rx_power_dbm - a.reference_rx_power_dbm).abs() < 0.1);
    assert_eq!(a.probe.n_samples, a.reference.n_samples);
    assert_eq!(a.clamped_samples, 0);
    let c = run_comparative(&ScenarioConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(a.probe.variance, c.probe.variance);
}

#[test]
fn power_sweep_overlay_is_quadratic() {
    let cfg = ScenarioConfig::desk();
    let (n0, c0) = analytic_overlay(&cfg, 110, 0.0).unwrap();
    let (n2, c2) = analytic_overlay(&cfg, 110, -2.0).unwrap();
    assert!((c0 / c2 / 10f64.powf(0.4) - 1.0).abs() < 1e-12);
    assert!((n0 / n2 / 10f64.powf(0.4) - 1.0).abs() < 1e-9);
}

#[test]
fn nldp_variance_grows_with_distance() {
    let cfg = ScenarioConfig {
        mode: Mode::DistanceSweep,
        circulations: vec![1, 3],
        ensemble_size: 4,
        noise_draws: 2,
        ..ScenarioConfig::desk()
    };
    let r = run_distance_sweep(&cfg).unwrap();
    assert_eq!(r.points.len(), 2);
    assert_eq!((r.points[0].n_spans, r.points[1].n_spans), (11, 33));
    assert!(r.points[0].sigma2_nldp > 0.0);
    assert!(r.points[1].sigma2_nldp > r.points[0].sigma2_nldp, "{:?}", r.points);
    assert!(r.fit.unwrap().slope > 0.0);
}

#[test]
fn analytic_report_at_full_band() {
    let r = run_analytic(&ScenarioConfig::full_band()).unwrap();
    assert!((r.sigma2_symmetric / 4.183_619_547_488_794e-4 - 1.0).abs() < 1e-12);
    assert!(r.perturbation_half_width_hz > 5e6 && r.perturbation_half_width_hz < 20e6);
    assert!(r.numeric_second_moment > 0.0 && r.sop_speed.rms > 0.0);
}

#[test]
fn report_files_are_written() {
    let dir = std::env::temp_dir().join(format!("nldp-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let r = run_analytic(&ScenarioConfig::full_band()).unwrap();
    let files = write_analytic(&r, &dir, ReportFormat::Both).unwrap();
    assert!(files.len() >= 2);
    assert!(files.iter().all(|f| std::fs::metadata(f).unwrap().len() > 0));
    std::fs::remove_dir_all(&dir).unwrap();
}
