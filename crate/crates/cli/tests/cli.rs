use std::path::{Path, PathBuf};
use std::process::Command;

use nldp_core::polarimeter::{histogram, StokesTrace};
use nldp_core::polarization::StokesVector;

fn nldp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nldp"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("nldp-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn analytic_run_writes_reports() {
    let out = scratch("analytic");
    let s = nldp().args(["analytic"]).arg(config("full_band.toml")).arg("--out").arg(&out).status().unwrap();
    assert_eq!(s.code(), Some(0));
    let json = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "json")).count();
    assert!(json >= 1);
    std::fs::remove_dir_all(&out).unwrap();
}

#[test]
fn bad_config_exits_with_two() {
    let dir = scratch("badcfg");
    let p = dir.join("bad.toml");
    std::fs::write(&p, "no_such_key = 1\n").unwrap();
    let o = nldp().arg("simulate").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = nldp().arg("simulate").arg(dir.join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn histogram_and_compare() {
    let dir = scratch("hist");
    let samples: Vec<_> = (0..200)
        .map(|k| {
            let a = 0.003 * (k * k) as f64;
            StokesVector::new(1.0, a.cos(), a.sin(), 0.0)
        })
        .collect();
    let trace = dir.join("t.sopt");
    StokesTrace::new(10e-9, samples).save(&trace).unwrap();
    let o = nldp().arg("histogram").arg(&trace).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("bin_index,lower_edge_rad_s,count"));

    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let mut ha = histogram(&[1.0, 2.0, 3.0, 10.0]).unwrap();
    ha.sample_period = Some(10e-9);
    let mut hb = histogram(&[1.0, 2.0, 3.0]).unwrap();
    hb.sample_period = Some(10e-9);
    ha.save(&a).unwrap();
    hb.save(&b).unwrap();
    let o = nldp().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let diff: f64 = row[2].parse().unwrap();
    assert!((diff - (ha.variance - hb.variance)).abs() < 1e-12);
    assert_eq!(row[3], "false");

    let o = nldp().args(["--format", "json", "compare"]).arg(&b).arg(&a).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["below_floor"], serde_json::Value::Bool(true));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn corrupt_trace_is_an_input_error() {
    let dir = scratch("corrupt");
    let p = dir.join("t.sopt");
    std::fs::write(&p, b"nonsense").unwrap();
    let o = nldp().arg("histogram").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn aliasing_abort_exits_with_three() {
    let dir = scratch("alias");
    let p = dir.join("c.toml");
    let cfg = "n_spans = 1\nensemble_size = 1\nnoise_draws = 1\nsampling_phases = 1\nalias_tolerance = 1e-15\n";
    std::fs::write(&p, cfg).unwrap();
    let o = nldp().arg("simulate").arg(&p).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::remove_dir_all(&dir).unwrap();
}
