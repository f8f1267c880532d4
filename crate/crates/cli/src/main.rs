//! `vexpa` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 analysis failure, 3 an experiment
//! missed one of its acceptance thresholds.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex;
use serde_json::json;
use vexpa::diagnostics::{crlb, disposedness, noise_variance};
use vexpa::experiment::{run_experiment, ExperimentName, ExperimentSpec};
use vexpa::signal::{add_noise, inject_outlier, sample};
use vexpa::{io, run_baseline, run_vexpa, SamplingGrid, SignalModel, VexpaConfig};

#[derive(Parser)]
#[command(name = "vexpa", version, about = "Validated exponential analysis on decimated samples")]
struct Cli {
    /// Default directory for outputs when no explicit path is given.
    #[arg(long, env = "VEXPA_OUTPUT_ROOT", default_value = ".", global = true)]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a model, optionally adding noise and outliers.
    Generate(GenerateArgs),
    /// Analyse a sample file with VEXPA or the full-rate baseline.
    Analyze(AnalyzeArgs),
    /// Run an experiment protocol and write its tables and summary.
    Experiment(ExperimentArgs),
    /// Cramer-Rao bounds of a model on a grid.
    Crlb(CrlbArgs),
    /// Disposedness bounds of a model for several undersampling factors.
    Disposedness(DisposednessArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Sampling rate 1 / delta.
    #[arg(long, conflicts_with = "delta")]
    rate: Option<f64>,
    /// Sampling interval.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of samples N.
    #[arg(long, short = 'n', default_value_t = 300)]
    count: usize,
}

impl GridArgs {
    fn grid(&self) -> anyhow::Result<SamplingGrid> {
        let delta = match (self.rate, self.delta) {
            (Some(r), None) => 1.0 / r,
            (None, Some(d)) => d,
            (None, None) => bail!("one of --rate or --delta is required"),
            (Some(_), Some(_)) => unreachable!("clap rejects both"),
        };
        Ok(SamplingGrid::new(delta, self.count)?)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Model JSON: {"terms":[{"beta":..,"gamma":..,"psi":..,"omega":..}]}.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Add white circular Gaussian noise at this SNR in dB.
    #[arg(long)]
    snr: Option<f64>,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outlier as `index:re:im`, applied after the noise; repeatable.
    #[arg(long, value_parser = parse_outlier)]
    outlier: Vec<(usize, f64, f64)>,
    /// Output CSV; the sidecar goes next to it as `.meta.json`.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Vexpa,
    Baseline,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Sample CSV written by `generate` or with the same columns.
    #[arg(long)]
    samples: PathBuf,
    /// VEXPA configuration JSON; defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "vexpa")]
    mode: Mode,
    /// Model order for the baseline.
    #[arg(long)]
    order: Option<usize>,
    /// Result JSON; printed to stdout when absent.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec JSON.
    #[arg(long, conflicts_with = "name")]
    spec: Option<PathBuf>,
    /// Run an experiment with its default settings.
    #[arg(long, value_enum)]
    name: Option<NameArg>,
    /// Report directory; defaults to `<output root>/<experiment>`.
    #[arg(long, short = 'o')]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NameArg {
    Outlier,
    HighNoise,
    CrlbCurves,
    DisposednessToy,
    CollisionDemo,
}

impl From<NameArg> for ExperimentName {
    fn from(n: NameArg) -> Self {
        match n {
            NameArg::Outlier => ExperimentName::Outlier,
            NameArg::HighNoise => ExperimentName::HighNoise,
            NameArg::CrlbCurves => ExperimentName::CrlbCurves,
            NameArg::DisposednessToy => ExperimentName::DisposednessToy,
            NameArg::CollisionDemo => ExperimentName::CollisionDemo,
        }
    }
}

#[derive(Args)]
struct CrlbArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// SNR values in dB.
    #[arg(long, num_args = 1.., default_values_t = [30.0])]
    snr: Vec<f64>,
}

#[derive(Args)]
struct DisposednessArgs {
    #[arg(long)]
    model: PathBuf,
    /// Base sampling rate 1 / delta.
    #[arg(long)]
    rate: f64,
    /// Undersampling factors.
    #[arg(long, num_args = 1.., default_values_t = [1usize, 10])]
    u: Vec<usize>,
}

fn parse_outlier(s: &str) -> Result<(usize, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected index:re:im, got {s:?}"));
    }
    let idx = parts[0].parse().map_err(|e| format!("index: {e}"))?;
    let re = parts[1].parse().map_err(|e| format!("re: {e}"))?;
    let im = parts[2].parse().map_err(|e| format!("im: {e}"))?;
    Ok((idx, re, im))
}

enum Failure {
    Usage(anyhow::Error),
    Analysis(anyhow::Error),
    Threshold(String),
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn analysis<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Analysis(e.into())
}

fn emit(out: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(analysis)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(analysis),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<SignalModel, Failure> {
    io::read_model(path)
        .with_context(|| format!("reading model {}", path.display()))
        .map_err(usage)
}

fn generate(a: GenerateArgs, root: &Path) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    let grid = a.grid.grid().map_err(usage)?;
    let mut set = sample(&model, &grid);
    if let Some(snr) = a.snr {
        set = add_noise(&set, snr, a.seed).map_err(usage)?;
    }
    for (idx, re, im) in a.outlier {
        set = inject_outlier(&set, idx, Complex::new(re, im)).map_err(usage)?;
    }
    let out = a.out.unwrap_or_else(|| root.join("samples.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(analysis)?;
    }
    io::write_samples(&out, &set)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(analysis)
}

fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let samples = io::read_samples(&a.samples)
        .with_context(|| format!("reading samples {}", a.samples.display()))
        .map_err(usage)?;
    let cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(usage)?;
            VexpaConfig::from_json_str(&text).map_err(usage)?
        }
        None => VexpaConfig::default(),
    };
    let meta = json!({
        "samples": samples.len(),
        "delta": samples.grid.delta,
        "perturbations": samples.perturbations,
    });
    let value = match a.mode {
        Mode::Vexpa => {
            cfg.validate(samples.len()).map_err(usage)?;
            let r = run_vexpa(&samples, &cfg).map_err(analysis)?;
            json!({
                "mode": "vexpa",
                "metadata": meta,
                "model": { "terms": r.exponential_terms() },
                "result": r,
            })
        }
        Mode::Baseline => {
            let n = a.order.ok_or_else(|| usage(anyhow!("--order is required for the baseline")))?;
            let terms = run_baseline(&samples, n, cfg.base_method).map_err(analysis)?;
            json!({
                "mode": "baseline",
                "metadata": meta,
                "base_method": cfg.base_method,
                "model": { "terms": terms },
            })
        }
    };
    emit(a.out.as_deref(), &value)
}

fn experiment(a: ExperimentArgs, root: &Path) -> Result<(), Failure> {
    let spec = match (&a.spec, a.name) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(usage)?;
            ExperimentSpec::from_json_str(&text).map_err(usage)?
        }
        (None, Some(n)) => ExperimentSpec::new(n.into()),
        (None, None) => return Err(usage(anyhow!("one of --spec or --name is required"))),
    };
    let dir_name = serde_json::to_value(spec.name)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_else(|| "experiment".into());
    let report = run_experiment(&spec).map_err(analysis)?;
    let dir = a.out_dir.unwrap_or_else(|| root.join(dir_name));
    report.write(&dir).map_err(analysis)?;
    for c in &report.summary.checks {
        println!(
            "{} {} = {:.6e} (need {} {:e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.comparison,
            c.threshold
        );
    }
    if report.summary.passed {
        Ok(())
    } else {
        Err(Failure::Threshold(format!("report written to {}", dir.display())))
    }
}

fn crlb_cmd(a: CrlbArgs) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    let grid = a.grid.grid().map_err(usage)?;
    let rows = a
        .snr
        .iter()
        .map(|&snr| {
            let r = crlb(&model, &grid, noise_variance(&model, &grid, snr))?;
            Ok(json!({ "snr_db": snr, "omega_rms_std": r.omega_rms_std(), "report": r }))
        })
        .collect::<vexpa::Result<Vec<_>>>()
        .map_err(analysis)?;
    emit(None, &json!(rows))
}

fn disposedness_cmd(a: DisposednessArgs) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    if !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(usage(anyhow!("--rate must be positive")));
    }
    let rows = a
        .u
        .iter()
        .map(|&u| disposedness(&model, 1.0 / a.rate, u))
        .collect::<vexpa::Result<Vec<_>>>()
        .map_err(analysis)?;
    emit(None, &json!(rows))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let root = cli.output_root;
    let outcome = match cli.command {
        Command::Generate(a) => generate(a, &root),
        Command::Analyze(a) => analyze(a),
        Command::Experiment(a) => experiment(a, &root),
        Command::Crlb(a) => crlb_cmd(a),
        Command::Disposedness(a) => disposedness_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Analysis(e)) => {
            eprintln!("analysis failed: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("acceptance thresholds not met; {msg}");
            ExitCode::from(3)
        }
    }
}
