use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nldp_core::harness::{
    run_analytic, run_comparative, run_distance_sweep, run_power_sweep, write_analytic, write_comparative,
    write_sweep_report, Mode, ReportFormat, ScenarioConfig,
};
use nldp_core::polarimeter::{sop_speed_series, variance_subtract, SopSpeedHistogram, StokesTrace};
use nldp_core::NldpError;

#[derive(Parser)]
#[command(name = "nldp", version, about = "Nonlinear depolarization simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory (overrides output_dir in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// override the ensemble size
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    /// report format; both are written when omitted
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario in the mode its config names (comparative by default)
    Simulate { config: PathBuf },
    /// Evaluate the closed-form and numeric theory only
    Analytic { config: PathBuf },
    /// Distance sweep over the configured circulations
    SweepDistance { config: PathBuf },
    /// Repeater power sweep over the configured offsets
    SweepPower { config: PathBuf },
    /// SOP-speed histogram of a Stokes trace file
    Histogram { trace: PathBuf },
    /// Variance difference of two histogram files (first minus second)
    Compare { hist_a: PathBuf, hist_b: PathBuf },
}

fn report_format(f: Option<Format>) -> ReportFormat {
    match f {
        None => ReportFormat::Both,
        Some(Format::Csv) => ReportFormat::Csv,
        Some(Format::Json) => ReportFormat::Json,
    }
}

fn load_config(cli: &Cli, path: &Path) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cli.ensemble {
        cfg.ensemble_size = e;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_mode(cli: &Cli, cfg: &ScenarioConfig, mode: Mode) -> Result<Vec<PathBuf>> {
    let fmt = report_format(cli.format);
    let dir = &cfg.output_dir;
    let written = match mode {
        Mode::Comparative => {
            let r = run_comparative(cfg)?;
            eprintln!(
                "sigma2_nldp = {:.4e} (rad/s)^2 +- {:.2e}, probe {:.4e}, reference {:.4e}, boost {:.4e}",
                r.sigma2_nldp, r.sigma2_nldp_stderr, r.probe.variance, r.reference.variance, r.boost.variance
            );
            write_comparative(&r, cfg, dir, fmt)?
        }
        Mode::DistanceSweep => {
            let r = run_distance_sweep(cfg)?;
            if let Some(f) = r.fit {
                eprintln!("fit: slope {:.4e} (rad/s)^2/km, r2 {:.4}", f.slope, f.r2);
            }
            write_sweep_report(&r, dir, "distance_sweep", fmt)?
        }
        Mode::PowerSweep => {
            let r = run_power_sweep(cfg)?;
            write_sweep_report(&r, dir, "power_sweep", fmt)?
        }
        Mode::AnalyticOnly => {
            let r = run_analytic(cfg)?;
            eprintln!(
                "sop speed {:.4e} rad/s (closed form), half-width {:.3e} Hz",
                r.sop_speed.rms, r.perturbation_half_width_hz
            );
            write_analytic(&r, dir, fmt)?
        }
    };
    Ok(written)
}

fn histogram_cmd(cli: &Cli, trace: &Path) -> Result<()> {
    let t = StokesTrace::load(trace).with_context(|| format!("reading {}", trace.display()))?;
    if t.warning() {
        eprintln!("warning: {} samples were clamped during detection", t.clamped);
    }
    let mut h = SopSpeedHistogram::from_series(&sop_speed_series(&t)?)?;
    h.sample_period = Some(t.sample_period);
    match (&cli.out, cli.format) {
        (_, Some(Format::Json)) => {
            let s = serde_json::to_string_pretty(&h)?;
            match &cli.out {
                Some(dir) => write_file(dir, "histogram.json", s.as_bytes())?,
                None => println!("{s}"),
            }
        }
        (Some(dir), _) => {
            std::fs::create_dir_all(dir)?;
            h.save(&dir.join("histogram.csv"))?;
            eprintln!("wrote {}", dir.join("histogram.csv").display());
        }
        (None, _) => {
            let out = std::io::stdout();
            h.write_csv(out.lock())?;
        }
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    std::fs::File::create(&p)?.write_all(bytes)?;
    eprintln!("wrote {}", p.display());
    Ok(())
}

fn compare_cmd(cli: &Cli, a: &Path, b: &Path) -> Result<()> {
    let ha = SopSpeedHistogram::load(a).with_context(|| format!("reading {}", a.display()))?;
    let hb = SopSpeedHistogram::load(b).with_context(|| format!("reading {}", b.display()))?;
    let d = variance_subtract(&ha, &hb)?;
    let text = match cli.format {
        Some(Format::Json) => serde_json::to_string_pretty(&serde_json::json!({
            "variance_a": ha.variance,
            "variance_b": hb.variance,
            "difference": d.value,
            "below_floor": d.below_floor,
        }))?,
        _ => format!(
            "variance_a,variance_b,difference,below_floor\n{},{},{},{}",
            ha.variance, hb.variance, d.value, d.below_floor
        ),
    };
    match &cli.out {
        Some(dir) => {
            let name = if matches!(cli.format, Some(Format::Json)) { "compare.json" } else { "compare.csv" };
            write_file(dir, name, format!("{text}\n").as_bytes())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let written = match &cli.command {
        Command::Simulate { config } => {
            let cfg = load_config(cli, config)?;
            run_mode(cli, &cfg, cfg.mode)?
        }
        Command::Analytic { config } => run_mode(cli, &load_config(cli, config)?, Mode::AnalyticOnly)?,
        Command::SweepDistance { config } => run_mode(cli, &load_config(cli, config)?, Mode::DistanceSweep)?,
        Command::SweepPower { config } => run_mode(cli, &load_config(cli, config)?, Mode::PowerSweep)?,
        Command::Histogram { trace } => return histogram_cmd(cli, trace),
        Command::Compare { hist_a, hist_b } => return compare_cmd(cli, hist_a, hist_b),
    };
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<NldpError>().is_none_or(NldpError::is_config_error);
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
