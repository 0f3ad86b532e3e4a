//! End-to-end scenarios: comparative probe/reference runs, distance and power
//! sweeps, linear fits and report files.

mod config;

pub use config::{Mode, ScenarioConfig, DESK_COMPRESSION};

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    rolloff_table, sop_speed_prediction, symmetric_phase_variance, AnalyticSettings, NldpModel, RolloffTable,
    SopSpeedPrediction,
};
use crate::error::{NldpError, Result};
use crate::field::{comb_to_time_with_len, make_loading, make_probe, CombGrid, ComplexEnvelope};
use crate::link::{realize_span_with, FiberParams, LinkConfig, SpanOptions};
use crate::polarimeter::{
    detect_analog, mean_variance, sop_speed_series, variance_subtract, SopSpeedHistogram,
};
use crate::polarization::{haar_rotation_from, JonesVector};
use crate::rng::{self, derive_seed, label};
use crate::ssfm::{propagate_link_differential, propagate_link_tapped, RepeaterStage};
use crate::units;

/// SOP-speed samples of one ensemble member at one tap.
#[derive(Debug, Clone)]
pub struct TapSeries {
    pub n_spans: usize,
    pub probe: Vec<f64>,
    pub reference: Vec<f64>,
    pub boost: Vec<f64>,
    /// W, mean power reaching the polarimeter
    pub probe_rx_power: f64,
    pub reference_rx_power: f64,
    pub osnr_db: f64,
    pub clamped: usize,
}

fn scaled(mut env: ComplexEnvelope, k: f64) -> ComplexEnvelope {
    env.ex.iter_mut().chain(env.ey.iter_mut()).for_each(|a| *a *= k);
    env
}

/// Propagate one ensemble member and run its probe, reference and boosted
/// reference through the polarimeter at every tap.
pub fn run_member(cfg: &ScenarioConfig, member: usize, taps: &[usize], power_offset_db: f64) -> Result<Vec<TapSeries>> {
    let ms = derive_seed(cfg.seed, &[label::MEMBER, member as u64]);
    let params = cfg.fiber();
    let gain = units::db_to_linear(power_offset_db);
    let max_tap = taps.iter().copied().max().ok_or_else(|| NldpError::InvalidArgument("no taps".into()))?;
    let link = LinkConfig {
        n_spans: max_tap,
        p_rep: cfg.link().p_rep * gain,
        probe_power: cfg.link().probe_power * gain,
        seed: ms,
        ..cfg.link()
    };
    let pitch = cfg.pitch();
    let grid = CombGrid::symmetric(pitch, 2.0 * link.omega_max, cfg.probe_frequency_hz)?;
    let gap = link.gap_width;
    // launched loading power equals p_rep once the gap tones are dropped
    let loading0 = make_loading(link.p_rep, grid, cfg.probe_frequency_hz, gap, ms)?;
    let loaded = (grid.n_min..=grid.n_max).filter(|&n| !loading0.in_gap(n)).count();
    let mut loading = loading0;
    loading.scale((grid.len() as f64 / loaded as f64).sqrt());
    let sop = haar_rotation_from(&mut rng::stream(ms, &[label::PROBE_SOP])).apply(JonesVector::x_pol());
    let probe = make_probe(link.probe_power, cfg.probe_frequency_hz, sop, &loading)?;
    let n = cfg.samples_per_window;
    let period = grid.period();
    let opts = SpanOptions { center_frequency: cfg.probe_frequency_hz, calibration: cfg.pmd_calibration };
    let spans = (0..cfg.spans_per_circulation)
        .map(|k| realize_span_with(&params, link.span_length, derive_seed(ms, &[label::SPAN, k as u64]), opts))
        .collect::<Result<Vec<_>>>()?;
    let settings = cfg.propagation();
    let stage = RepeaterStage {
        band_edge: Some(link.omega_max + 0.5 * pitch),
        ..RepeaterStage::for_link(&link, &params)
    };

    let probe_env = comb_to_time_with_len(&probe, period, n)?;
    let probe_out = if cfg.differential_probe {
        let loading_env = comb_to_time_with_len(&loading, period, n)?;
        let edge = cfg.gap_cleaning.then_some(link.omega_min - 0.5 * pitch);
        propagate_link_differential(&loading_env, &probe_env, &link, &spans, &params, &settings, &stage, edge, taps)?
    } else {
        let both = comb_to_time_with_len(&loading.superpose(&probe)?, period, n)?;
        propagate_link_tapped(&both, &link, &spans, &params, &settings, &stage, taps)?
    };
    // back-to-back emulation: same launch, no Kerr effect, no loading
    let linear = FiberParams { gamma: 0.0, ..params };
    let ref_stage = RepeaterStage { target_power: link.probe_power, ase_psd_per_pol: None, ..stage };
    let ref_out = propagate_link_tapped(&probe_env, &link, &spans, &linear, &settings, &ref_stage, taps)?;

    let mut out = Vec::with_capacity(taps.len());
    for ((ns, pe), (_, re)) in probe_out.into_iter().zip(ref_out) {
        let osnr = cfg.osnr_db.unwrap_or_else(|| link.received_osnr_db(&params, ns));
        let p_rx = pe.mean_power();
        let r_rx = re.mean_power();
        let re = scaled(re, (p_rx / r_rx).sqrt());
        let normal = cfg.polarimeter(Some(osnr));
        let boosted = cfg.polarimeter(Some(osnr - cfg.noise_boost_db));
        let mut t = TapSeries {
            n_spans: ns,
            probe: Vec::new(),
            reference: Vec::new(),
            boost: Vec::new(),
            probe_rx_power: p_rx,
            reference_rx_power: re.mean_power(),
            osnr_db: osnr,
            clamped: 0,
        };
        for draw in 0..cfg.noise_draws as u64 {
            let seed = |path: u64| derive_seed(ms, &[label::DETECT, ns as u64, draw, path]);
            let jobs: [(&ComplexEnvelope, _, u64, &mut Vec<f64>); 3] = [
                (&pe, &normal, seed(0), &mut t.probe),
                (&re, &normal, seed(1), &mut t.reference),
                (&re, &boosted, seed(2), &mut t.boost),
            ];
            for (env, set, s, dst) in jobs {
                let analog = detect_analog(env, set, s)?;
                for phase in 0..cfg.sampling_phases {
                    let tr = analog.sample(set, phase)?;
                    t.clamped += tr.clamped;
                    dst.extend(sop_speed_series(&tr)?);
                }
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// All members in parallel, collected in member order.
pub fn run_ensemble(cfg: &ScenarioConfig, taps: &[usize], power_offset_db: f64) -> Result<Vec<Vec<TapSeries>>> {
    (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|m| run_member(cfg, m, taps, power_offset_db))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparativeResult {
    pub n_spans: usize,
    pub probe: SopSpeedHistogram,
    pub reference: SopSpeedHistogram,
    pub boost: SopSpeedHistogram,
    /// (rad/s)^2
    pub sigma2_nldp: f64,
    /// jackknife standard error over ensemble members
    pub sigma2_nldp_stderr: f64,
    pub below_floor: bool,
    pub osnr_db: f64,
    pub probe_rx_power_dbm: f64,
    pub reference_rx_power_dbm: f64,
    pub clamped_samples: usize,
}

/// Pools the members' samples at tap index `k`.
pub fn pool(cfg: &ScenarioConfig, members: &[Vec<TapSeries>], k: usize) -> Result<ComparativeResult> {
    let tau = cfg.sample_period_ns * 1e-9;
    let cat = |f: fn(&TapSeries) -> &Vec<f64>| -> Vec<f64> { members.iter().flat_map(|m| f(&m[k]).iter().copied()).collect() };
    let hist = |v: Vec<f64>| -> Result<SopSpeedHistogram> {
        let mut h = SopSpeedHistogram::from_series(&v)?;
        h.sample_period = Some(tau);
        Ok(h)
    };
    let probe = hist(cat(|t| &t.probe))?;
    let reference = hist(cat(|t| &t.reference))?;
    let boost = hist(cat(|t| &t.boost))?;
    let diff = variance_subtract(&probe, &reference)?;
    let mean_of = |f: fn(&TapSeries) -> f64| members.iter().map(|m| f(&m[k])).sum::<f64>() / members.len() as f64;
    Ok(ComparativeResult {
        n_spans: members[0][k].n_spans,
        sigma2_nldp_stderr: jackknife(members, k),
        probe,
        reference,
        boost,
        sigma2_nldp: diff.value,
        below_floor: diff.below_floor,
        osnr_db: members[0][k].osnr_db,
        probe_rx_power_dbm: units::watt_to_dbm(mean_of(|t| t.probe_rx_power)),
        reference_rx_power_dbm: units::watt_to_dbm(mean_of(|t| t.reference_rx_power)),
        clamped_samples: members.iter().map(|m| m[k].clamped).sum(),
    })
}

// Leave-one-member-out standard error of var(probe) - var(reference).
fn jackknife(members: &[Vec<TapSeries>], k: usize) -> f64 {
    let m = members.len();
    if m < 2 {
        return f64::NAN;
    }
    // per-member sums of x and x^2 make each leave-one-out variance O(1)
    let sums = |f: fn(&TapSeries) -> &Vec<f64>| -> Vec<(f64, f64, f64)> {
        members
            .iter()
            .map(|mm| {
                let v = f(&mm[k]);
                (v.len() as f64, v.iter().sum::<f64>(), v.iter().map(|x| x * x).sum::<f64>())
            })
            .collect()
    };
    let sp = sums(|t| &t.probe);
    let sr = sums(|t| &t.reference);
    let total = |s: &[(f64, f64, f64)]| s.iter().fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let (tp, tr) = (total(&sp), total(&sr));
    let var = |n: f64, s: f64, q: f64| q / n - (s / n) * (s / n);
    let loo: Vec<f64> = (0..m)
        .map(|i| {
            var(tp.0 - sp[i].0, tp.1 - sp[i].1, tp.2 - sp[i].2) - var(tr.0 - sr[i].0, tr.1 - sr[i].1, tr.2 - sr[i].2)
        })
        .collect();
    let (mean, _) = mean_variance(&loo);
    let ss: f64 = loo.iter().map(|x| (x - mean) * (x - mean)).sum();
    ((m as f64 - 1.0) / m as f64 * ss).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 2 {
        return Err(NldpError::DegenerateFit("need at least two points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(NldpError::DegenerateFit("all x values are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// km for distance sweeps, dBm of P_Rep for power sweeps
    pub x: f64,
    pub n_spans: usize,
    pub sigma2_probe: f64,
    pub sigma2_reference: f64,
    pub sigma2_boost: f64,
    pub sigma2_nldp: f64,
    pub sigma2_nldp_stderr: f64,
    pub below_floor: bool,
    pub osnr_db: f64,
    /// numeric model at the comb pitch, (rad/s)^2
    pub analytic_sigma2: f64,
    /// closed form, (rad/s)^2
    pub closed_form_sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: Mode,
    pub points: Vec<SweepPoint>,
    pub fit: Option<LinearFit>,
    pub config: ScenarioConfig,
}

/// Numeric and closed-form SOP-speed second moments at a given span count and power offset.
pub fn analytic_overlay(cfg: &ScenarioConfig, n_spans: usize, power_offset_db: f64) -> Result<(f64, f64)> {
    let params = cfg.fiber();
    let link = LinkConfig {
        n_spans,
        p_rep: cfg.link().p_rep * units::db_to_linear(power_offset_db),
        ..cfg.link()
    };
    let settings = AnalyticSettings { pitch: cfg.pitch(), ..AnalyticSettings::default() };
    let model = NldpModel::new(&link, &params, cfg.band(), settings)?;
    let numeric = model.sop_speed_second_moment(cfg.sample_period_ns * 1e-9);
    let closed = sop_speed_prediction(&link, &params, cfg.band())?.second_moment;
    Ok((numeric, closed))
}

fn point(x: f64, r: &ComparativeResult, overlay: (f64, f64)) -> SweepPoint {
    SweepPoint {
        x,
        n_spans: r.n_spans,
        sigma2_probe: r.probe.variance,
        sigma2_reference: r.reference.variance,
        sigma2_boost: r.boost.variance,
        sigma2_nldp: r.sigma2_nldp,
        sigma2_nldp_stderr: r.sigma2_nldp_stderr,
        below_floor: r.below_floor,
        osnr_db: r.osnr_db,
        analytic_sigma2: overlay.0,
        closed_form_sigma2: overlay.1,
    }
}

pub fn run_comparative(cfg: &ScenarioConfig) -> Result<ComparativeResult> {
    cfg.validate()?;
    let members = run_ensemble(cfg, &[cfg.n_spans], 0.0)?;
    pool(cfg, &members, 0)
}

pub fn run_distance_sweep(cfg: &ScenarioConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.circulations.is_empty() {
        return Err(NldpError::Config("circulations list is empty".into()));
    }
    let mut taps: Vec<usize> = cfg.circulations.iter().map(|c| c * cfg.spans_per_circulation).collect();
    taps.sort_unstable();
    taps.dedup();
    let members = run_ensemble(cfg, &taps, 0.0)?;
    let mut points = Vec::with_capacity(taps.len());
    for (k, &ns) in taps.iter().enumerate() {
        let r = pool(cfg, &members, k)?;
        points.push(point(ns as f64 * cfg.span_length_km, &r, analytic_overlay(cfg, ns, 0.0)?));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.sigma2_nldp)).collect();
    let fit = fit_linear(&xy).ok();
    Ok(SweepReport { kind: Mode::DistanceSweep, points, fit, config: cfg.clone() })
}

/// Repeater power sweep at fixed distance. The repeaters keep their gain, so
/// the probe OSNR drops with the output power; every offset reuses the same
/// member seeds.
pub fn run_power_sweep(cfg: &ScenarioConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.power_offsets_db.is_empty() {
        return Err(NldpError::Config("power_offsets_db list is empty".into()));
    }
    let mut offsets = cfg.power_offsets_db.clone();
    offsets.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(offsets.len());
    for &off in &offsets {
        let members = run_ensemble(cfg, &[cfg.n_spans], off)?;
        let r = pool(cfg, &members, 0)?;
        points.push(point(cfg.p_rep_dbm + off, &r, analytic_overlay(cfg, cfg.n_spans, off)?));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.sigma2_nldp)).collect();
    let fit = fit_linear(&xy).ok();
    Ok(SweepReport { kind: Mode::PowerSweep, points, fit, config: cfg.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub config: ScenarioConfig,
    /// rad^2 per unit probe power
    pub sigma2_symmetric: f64,
    pub sop_speed: SopSpeedPrediction,
    /// (rad/s)^2 from the numeric autocorrelation
    pub numeric_second_moment: f64,
    /// Hz, half-width of the l-profile with the polarimeter low-pass
    pub perturbation_half_width_hz: f64,
    pub rolloff_hz: RolloffTable,
}

pub fn run_analytic(cfg: &ScenarioConfig) -> Result<AnalyticReport> {
    cfg.validate()?;
    let params = cfg.fiber();
    let link = cfg.link();
    let model = NldpModel::new(&link, &params, cfg.band(), AnalyticSettings::default())?;
    Ok(AnalyticReport {
        config: cfg.clone(),
        sigma2_symmetric: symmetric_phase_variance(&link, &params)?,
        sop_speed: sop_speed_prediction(&link, &params, cfg.band())?,
        numeric_second_moment: model.sop_speed_second_moment(cfg.sample_period_ns * 1e-9),
        perturbation_half_width_hz: model.half_width(true) / (2.0 * std::f64::consts::PI),
        rolloff_hz: rolloff_table(&params, &link, cfg.band()),
    })
}

/// Which report files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl ReportFormat {
    fn json(self) -> bool {
        self != ReportFormat::Csv
    }
    fn csv(self) -> bool {
        self != ReportFormat::Json
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    let f = std::fs::File::create(&p)?;
    Ok((p, std::io::BufWriter::new(f)))
}

pub fn write_sweep_report(r: &SweepReport, dir: &Path, stem: &str, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if format.json() {
        let (p, mut w) = create(dir, &format!("{stem}.json"))?;
        serde_json::to_writer_pretty(&mut w, r)?;
        w.flush()?;
        written.push(p);
    }
    if format.csv() {
        let (p, mut w) = create(dir, &format!("{stem}.csv"))?;
        writeln!(
            w,
            "x,n_spans,sigma2_probe,sigma2_reference,sigma2_boost,sigma2_nldp,sigma2_nldp_stderr,below_floor,osnr_db,analytic_sigma2,closed_form_sigma2"
        )?;
        for p in &r.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.x,
                p.n_spans,
                p.sigma2_probe,
                p.sigma2_reference,
                p.sigma2_boost,
                p.sigma2_nldp,
                p.sigma2_nldp_stderr,
                p.below_floor,
                p.osnr_db,
                p.analytic_sigma2,
                p.closed_form_sigma2
            )?;
        }
        if let Some(f) = r.fit {
            writeln!(w, "# slope={}", f.slope)?;
            writeln!(w, "# intercept={}", f.intercept)?;
            writeln!(w, "# r2={}", f.r2)?;
        }
        for line in r.config.to_toml_string().lines() {
            writeln!(w, "# config: {line}")?;
        }
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}

pub fn write_comparative(r: &ComparativeResult, cfg: &ScenarioConfig, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, h) in [("probe", &r.probe), ("reference", &r.reference), ("boost", &r.boost)] {
        let (p, mut w) = create(dir, &format!("histogram_{name}.csv"))?;
        h.write_csv(&mut w)?;
        w.flush()?;
        written.push(p);
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a ScenarioConfig,
        n_spans: usize,
        sigma2_probe: f64,
        sigma2_reference: f64,
        sigma2_boost: f64,
        sigma2_nldp: f64,
        sigma2_nldp_stderr: f64,
        below_floor: bool,
        osnr_db: f64,
        probe_rx_power_dbm: f64,
        reference_rx_power_dbm: f64,
        clamped_samples: usize,
    }
    let s = Summary {
        config: cfg,
        n_spans: r.n_spans,
        sigma2_probe: r.probe.variance,
        sigma2_reference: r.reference.variance,
        sigma2_boost: r.boost.variance,
        sigma2_nldp: r.sigma2_nldp,
        sigma2_nldp_stderr: r.sigma2_nldp_stderr,
        below_floor: r.below_floor,
        osnr_db: r.osnr_db,
        probe_rx_power_dbm: r.probe_rx_power_dbm,
        reference_rx_power_dbm: r.reference_rx_power_dbm,
        clamped_samples: r.clamped_samples,
    };
    if format.json() {
        let (p, mut w) = create(dir, "summary.json")?;
        serde_json::to_writer_pretty(&mut w, &s)?;
        w.flush()?;
        written.push(p);
    }
    if format.csv() {
        let (p, mut w) = create(dir, "summary.csv")?;
        writeln!(w, "n_spans,sigma2_probe,sigma2_reference,sigma2_boost,sigma2_nldp,sigma2_nldp_stderr,below_floor,osnr_db")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.n_spans, s.sigma2_probe, s.sigma2_reference, s.sigma2_boost, s.sigma2_nldp, s.sigma2_nldp_stderr, s.below_floor, s.osnr_db
        )?;
        for line in cfg.to_toml_string().lines() {
            writeln!(w, "# config: {line}")?;
        }
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}

pub fn write_analytic(r: &AnalyticReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if format.json() {
        let (p, mut w) = create(dir, "analytic.json")?;
        serde_json::to_writer_pretty(&mut w, r)?;
        w.flush()?;
        written.push(p);
    }
    if format.csv() {
        let (p, mut w) = create(dir, "analytic.csv")?;
        writeln!(w, "quantity,value,unit")?;
        let rows = [
            ("sigma2_symmetric", r.sigma2_symmetric, "rad^2/W"),
            ("sop_speed_rms", r.sop_speed.rms, "rad/s"),
            ("sop_speed_second_moment", r.sop_speed.second_moment, "(rad/s)^2"),
            ("numeric_second_moment", r.numeric_second_moment, "(rad/s)^2"),
            ("perturbation_half_width", r.perturbation_half_width_hz, "Hz"),
            ("rolloff_pmd_link", r.rolloff_hz.pmd_link, "Hz"),
            ("rolloff_pmd_span", r.rolloff_hz.pmd_span, "Hz"),
            ("rolloff_walkoff_link", r.rolloff_hz.walkoff_link, "Hz"),
            ("rolloff_walkoff_span", r.rolloff_hz.walkoff_span, "Hz"),
        ];
        for (k, v, u) in rows {
            writeln!(w, "{k},{v},{u}")?;
        }
        for line in r.config.to_toml_string().lines() {
            writeln!(w, "# config: {line}")?;
        }
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_examples() {
        let f = fit_linear(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.intercept.abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let f = fit_linear(&[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert_eq!((f.slope, f.intercept), (0.0, 1.0));
        assert!(matches!(fit_linear(&[(1.0, 1.0), (1.0, 2.0)]), Err(NldpError::DegenerateFit(_))));
        assert!(fit_linear(&[(1.0, 1.0)]).is_err());
    }
}
