//! Reproducible experiment protocols with aggregate tables and threshold
//! checks.
//!
//! Every experiment is a pure function of its [`ExperimentSpec`]. Seed sweeps
//! run in parallel but results are collected in seed order, so the emitted
//! tables are byte-identical across runs and thread counts.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{crlb, disposedness, noise_variance};
use crate::error::{Result, VexpaError};
use crate::pipeline::{final_amplitudes, match_terms, run_baseline, run_vexpa, BaseMethod, VexpaConfig, VexpaResult};
use crate::presets;
use crate::signal::{add_noise, inject_outlier, sample, ExponentialTerm, SampleSet, SamplingGrid, SignalModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Outlier,
    HighNoise,
    CrlbCurves,
    DisposednessToy,
    CollisionDemo,
}

/// Experiment description; every field but `name` has a per-experiment
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    #[serde(default)]
    pub model: Option<SignalModel<f64>>,
    /// Sampling rate `1 / delta`.
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub snr_db: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub config: Option<VexpaConfig>,
    /// `(index, re, im)` of the injected outlier.
    #[serde(default)]
    pub outlier: Option<(usize, f64, f64)>,
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName) -> Self {
        Self {
            name,
            model: None,
            rate: None,
            samples: None,
            snr_db: None,
            seeds: None,
            config: None,
            outlier: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        if let Some(m) = &spec.model {
            m.validate()?;
        }
        Ok(spec)
    }

    fn seeds(&self) -> Result<Vec<u64>> {
        let seeds = self.seeds.clone().unwrap_or_else(|| (0..50).collect());
        if seeds.is_empty() {
            return Err(VexpaError::InvalidConfig("seed list is empty".into()));
        }
        Ok(seeds)
    }

    fn model_or(&self, f: fn() -> SignalModel<f64>) -> SignalModel<f64> {
        self.model.clone().unwrap_or_else(f)
    }

    fn grid(&self, rate: f64, count: usize) -> Result<SamplingGrid<f64>> {
        SamplingGrid::from_rate(self.rate.unwrap_or(rate), self.samples.unwrap_or(count))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub comparison: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: "<=".into(),
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: ">=".into(),
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: ExperimentName,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    /// Runs that raised an error, as `"context: message"`.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Summary,
    pub tables: Vec<Table>,
}

impl Report {
    fn new(experiment: ExperimentName, checks: Vec<Check>, metadata: BTreeMap<String, serde_json::Value>, failures: Vec<String>, tables: Vec<Table>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            summary: Summary {
                experiment,
                passed,
                checks,
                metadata,
                failures,
            },
            tables,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.summary.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, file: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.file == file).map(|t| t.csv.as_str())
    }

    /// Writes `summary.json` and every table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::io::write_json(&dir.join("summary.json"), &self.summary)?;
        for t in &self.tables {
            std::fs::write(dir.join(&t.file), &t.csv)?;
        }
        Ok(())
    }
}

fn table(file: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| VexpaError::Io(e.into_error()))?;
    Ok(Table {
        file: file.into(),
        csv: String::from_utf8(bytes).expect("csv output is utf-8"),
    })
}

fn meta(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Absolute angular-frequency errors of the matched `(estimate, truth)` pairs,
/// ordered by truth index.
pub fn frequency_errors(estimates: &[ExponentialTerm<f64>], truth: &SignalModel<f64>) -> Vec<(usize, usize, f64)> {
    let est: Vec<f64> = estimates.iter().map(|t| t.omega).collect();
    let tru: Vec<f64> = truth.terms.iter().map(|t| t.omega).collect();
    let mut pairs: Vec<_> = match_terms(&est, &tru)
        .into_iter()
        .map(|(e, t)| (e, t, (est[e] - tru[t]).abs()))
        .collect();
    pairs.sort_by_key(|p| p.1);
    pairs
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn noisy(clean: &SampleSet<f64>, snr: f64, seed: u64) -> Result<SampleSet<f64>> {
    add_noise(clean, snr, seed)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    match spec.name {
        ExperimentName::Outlier => outlier(spec),
        ExperimentName::HighNoise => high_noise(spec),
        ExperimentName::CrlbCurves => crlb_curves(spec),
        ExperimentName::DisposednessToy => disposedness_toy(spec),
        ExperimentName::CollisionDemo => collision_demo(spec),
    }
}

struct OutlierRun {
    seed: u64,
    result: std::result::Result<VexpaResult<f64>, String>,
    vexpa_errors: Vec<f64>,
    baseline_errors: Vec<f64>,
    baseline_error: Option<String>,
    /// Median amplitude errors `(excluding, including)` the outlier decimation.
    alpha_ab: Option<(f64, f64)>,
}

fn alpha_error(fit: &[Complex<f64>], truth: &SignalModel<f64>, pairs: &[(usize, usize, f64)]) -> f64 {
    let errs: Vec<f64> = pairs.iter().map(|&(e, t, _)| (fit[e] - truth.terms[t].alpha()).norm()).collect();
    median(&errs)
}

fn outlier(spec: &ExperimentSpec) -> Result<Report> {
    let model = spec.model_or(presets::outlier_table);
    let grid = spec.grid(presets::OUTLIER_RATE, 300)?;
    let snr = spec.snr_db.as_ref().and_then(|v| v.first().copied()).unwrap_or(30.0);
    let (idx, ore, oim) = spec.outlier.unwrap_or((23, 20.0, 0.0));
    let cfg = spec.config.clone().unwrap_or_default();
    let seeds = spec.seeds()?;
    cfg.validate(grid.count)?;
    let n = model.order();
    let clean = sample(&model, &grid);
    let crlb_std = crlb(&model, &grid, noise_variance(&model, &grid, snr))?.omega_rms_std();
    let outlier_k = idx % cfg.u;

    let runs: Vec<OutlierRun> = seeds
        .par_iter()
        .map(|&seed| {
            let data = noisy(&clean, snr, seed).and_then(|d| inject_outlier(&d, idx, Complex::new(ore, oim)));
            let data = match data {
                Ok(d) => d,
                Err(e) => {
                    return OutlierRun {
                        seed,
                        result: Err(e.to_string()),
                        vexpa_errors: Vec::new(),
                        baseline_errors: Vec::new(),
                        baseline_error: None,
                        alpha_ab: None,
                    }
                }
            };
            let result = run_vexpa(&data, &cfg).map_err(|e| e.to_string());
            let (vexpa_errors, alpha_ab) = match &result {
                Ok(r) => {
                    let pairs = frequency_errors(&r.exponential_terms(), &model);
                    let lambdas: Vec<_> = r.terms.iter().map(|t| t.record.lambda).collect();
                    let ab = if r.model_order == n {
                        let with = final_amplitudes(&data, &lambdas, &BTreeSet::from([outlier_k]), cfg.u);
                        let without = final_amplitudes(&data, &lambdas, &BTreeSet::new(), cfg.u);
                        match (with, without) {
                            (Ok(a), Ok(b)) => Some((
                                alpha_error(&a.amplitudes, &model, &pairs),
                                alpha_error(&b.amplitudes, &model, &pairs),
                            )),
                            _ => None,
                        }
                    } else {
                        None
                    };
                    (pairs.iter().map(|p| p.2).collect(), ab)
                }
                Err(_) => (Vec::new(), None),
            };
            let (baseline_errors, baseline_error) = match run_baseline(&data, n, BaseMethod::Esprit) {
                Ok(b) => (frequency_errors(&b, &model).iter().map(|p| p.2).collect(), None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            OutlierRun {
                seed,
                result,
                vexpa_errors,
                baseline_errors,
                baseline_error,
                alpha_ab,
            }
        })
        .collect();

    let mut failures = Vec::new();
    let mut exact = 0usize;
    let mut vexpa_errs = Vec::new();
    let mut base_errs = Vec::new();
    let mut signatures: BTreeMap<Vec<(usize, usize)>, usize> = BTreeMap::new();
    let mut ab_with = Vec::new();
    let mut ab_without = Vec::new();
    let mut run_rows = Vec::new();
    let mut term_rows = Vec::new();
    for run in &runs {
        if let Some(e) = &run.baseline_error {
            failures.push(format!("seed {} baseline: {e}", run.seed));
        }
        base_errs.extend(&run.baseline_errors);
        match &run.result {
            Ok(r) => {
                if r.model_order == n {
                    exact += 1;
                    vexpa_errs.extend(&run.vexpa_errors);
                }
                let mut sig: Vec<_> = r.terms.iter().map(|t| (t.record.u_cluster_count, t.record.s_cluster_count)).collect();
                sig.sort_unstable_by(|a, b| b.cmp(a));
                *signatures.entry(sig.clone()).or_default() += 1;
                if let Some((a, b)) = run.alpha_ab {
                    ab_with.push(a);
                    ab_without.push(b);
                }
                let sig_str = sig.iter().map(|(a, b)| format!("{a}/{b}")).collect::<Vec<_>>().join(" ");
                let excl = r.diagnostics.excluded_decimations.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
                run_rows.push(vec![
                    run.seed.to_string(),
                    r.model_order.to_string(),
                    sig_str,
                    excl,
                    fmt(median(&run.vexpa_errors)),
                    fmt(median(&run.baseline_errors)),
                ]);
                for t in &r.terms {
                    term_rows.push(vec![
                        run.seed.to_string(),
                        "vexpa".into(),
                        fmt(t.term.omega / (2.0 * PI)),
                        fmt(t.term.beta),
                    ]);
                }
            }
            Err(e) => {
                failures.push(format!("seed {} vexpa: {e}", run.seed));
                run_rows.push(vec![run.seed.to_string(), "error".into(), String::new(), String::new(), String::new(), fmt(median(&run.baseline_errors))]);
            }
        }
    }
    let modal = signatures
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(s, _)| s.clone())
        .unwrap_or_default();
    let affected: Vec<_> = modal.iter().filter(|(uc, _)| *uc < cfg.u).collect();
    let modal_ok = !affected.is_empty() && affected.iter().all(|&&(uc, sc)| uc == cfg.u - 1 && sc == 4);

    let total = runs.len() as f64;
    let vexpa_median = median(&vexpa_errs);
    let base_median = median(&base_errs);
    let checks = vec![
        Check::at_least("exact_order_rate", exact as f64 / total, 0.9),
        Check::at_most("median_error_over_crlb", vexpa_median / crlb_std, 10.0),
        Check::at_least("modal_affected_clusters_6_4", if modal_ok { 1.0 } else { 0.0 }, 1.0),
        Check::at_least("baseline_over_vexpa_median", base_median / vexpa_median, 10.0),
        Check::at_least("amplitude_error_including_over_excluding", median(&ab_without) / median(&ab_with), 1.0),
    ];

    // cluster point sets of the first run
    let mut point_rows = Vec::new();
    if let Some(Ok(r)) = runs.first().map(|r| &r.result) {
        for (side, pts) in [("u", &r.u_points), ("s", &r.s_points)] {
            for p in pts {
                point_rows.push(vec![side.into(), p.k.to_string(), p.i.to_string(), fmt(p.value.re), fmt(p.value.im)]);
            }
        }
    }
    let mut sig_rows: Vec<_> = signatures
        .iter()
        .map(|(s, c)| vec![s.iter().map(|(a, b)| format!("{a}/{b}")).collect::<Vec<_>>().join(" "), c.to_string()])
        .collect();
    sig_rows.sort_by(|a, b| b[1].parse::<usize>().unwrap_or(0).cmp(&a[1].parse::<usize>().unwrap_or(0)).then_with(|| a[0].cmp(&b[0])));

    let tables = vec![
        table("runs.csv", &["seed", "model_order", "clusters_u_s", "excluded", "vexpa_median_err", "baseline_median_err"], run_rows)?,
        table("terms.csv", &["seed", "method", "freq", "beta"], term_rows)?,
        table("clusters.csv", &["side", "k", "i", "re", "im"], point_rows)?,
        table("signatures.csv", &["clusters_u_s", "runs"], sig_rows)?,
    ];
    let metadata = meta(&[
        ("rate", grid.omega_rate().into()),
        ("samples", grid.count.into()),
        ("snr_db", snr.into()),
        ("outlier", serde_json::json!([idx, ore, oim])),
        ("seeds", seeds.len().into()),
        ("config", serde_json::to_value(&cfg)?),
        ("crlb_omega_std", crlb_std.into()),
        ("vexpa_median_error", vexpa_median.into()),
        ("baseline_median_error", base_median.into()),
        ("modal_signature", serde_json::to_value(&modal)?),
    ]);
    Ok(Report::new(ExperimentName::Outlier, checks, metadata, failures, tables))
}

fn high_noise(spec: &ExperimentSpec) -> Result<Report> {
    let model = spec.model_or(presets::high_noise_table);
    let grid = spec.grid(presets::HIGH_NOISE_RATE, 300)?;
    let snrs = spec
        .snr_db
        .clone()
        .unwrap_or_else(|| vec![40.0, 35.0, 30.0, 25.0, 20.0, 15.0, 10.0, 5.0, 0.0]);
    let cfg = spec.config.clone().unwrap_or_else(|| VexpaConfig::with_us(7, 6));
    let seeds = spec.seeds()?;
    cfg.validate(grid.count)?;
    let n = model.order();
    let clean = sample(&model, &grid);

    let jobs: Vec<(f64, u64)> = snrs.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    type Run = (f64, u64, std::result::Result<Vec<ExponentialTerm<f64>>, String>, std::result::Result<Vec<ExponentialTerm<f64>>, String>);
    let runs: Vec<Run> = jobs
        .par_iter()
        .map(|&(snr, seed)| match noisy(&clean, snr, seed) {
            Ok(data) => (
                snr,
                seed,
                run_vexpa(&data, &cfg).map(|r| r.exponential_terms()).map_err(|e| e.to_string()),
                run_baseline(&data, n, BaseMethod::Esprit).map_err(|e| e.to_string()),
            ),
            Err(e) => (snr, seed, Err(e.to_string()), Err(e.to_string())),
        })
        .collect();

    let mut failures = Vec::new();
    let mut checks = Vec::new();
    let mut var_rows = Vec::new();
    let mut scatter_rows = Vec::new();
    let mut run_rows = Vec::new();
    for &snr in &snrs {
        let crlb_std = crlb(&model, &grid, noise_variance(&model, &grid, snr))?.omega_rms_std();
        let mut v_errs = Vec::new();
        let mut b_errs = Vec::new();
        let mut output = 0usize;
        let mut baseline_full = 0usize;
        let mut count = 0usize;
        for (_, seed, v, b) in runs.iter().filter(|r| r.0 == snr) {
            count += 1;
            let mut order = String::from("error");
            match v {
                Ok(terms) => {
                    order = terms.len().to_string();
                    if !terms.is_empty() {
                        output += 1;
                        v_errs.extend(frequency_errors(terms, &model).iter().map(|p| p.2));
                    }
                    for t in terms {
                        scatter_rows.push(vec![snr.to_string(), seed.to_string(), "vexpa".into(), fmt(t.omega / (2.0 * PI))]);
                    }
                }
                Err(e) => failures.push(format!("snr {snr} seed {seed} vexpa: {e}")),
            }
            match b {
                Ok(terms) => {
                    if terms.len() == n {
                        baseline_full += 1;
                    }
                    b_errs.extend(frequency_errors(terms, &model).iter().map(|p| p.2));
                    for t in terms {
                        scatter_rows.push(vec![snr.to_string(), seed.to_string(), "baseline".into(), fmt(t.omega / (2.0 * PI))]);
                    }
                }
                Err(e) => failures.push(format!("snr {snr} seed {seed} baseline: {e}")),
            }
            run_rows.push(vec![snr.to_string(), seed.to_string(), order]);
        }
        let v_rms = rms(&v_errs);
        let b_rms = rms(&b_errs);
        let out_rate = output as f64 / count as f64;
        var_rows.push(vec![snr.to_string(), fmt(crlb_std), fmt(v_rms), fmt(out_rate), fmt(b_rms)]);
        if snr >= 20.0 {
            checks.push(Check::at_most(format!("vexpa_rms_over_crlb_{snr}dB"), v_rms / crlb_std, 10.0));
        }
        if snr <= 5.0 {
            checks.push(Check::at_least(format!("vexpa_empty_rate_{snr}dB"), 1.0 - out_rate, 0.8));
            checks.push(Check::at_least(format!("baseline_full_order_rate_{snr}dB"), baseline_full as f64 / count as f64, 1.0));
            checks.push(Check::at_least(format!("baseline_rms_over_crlb_{snr}dB"), b_rms / crlb_std, 100.0));
        }
    }
    let tables = vec![
        table("variance.csv", &["snr_db", "crlb_rms", "vexpa_rms", "vexpa_output_rate", "baseline_rms"], var_rows)?,
        table("scatter.csv", &["snr_db", "seed", "method", "freq"], scatter_rows)?,
        table("runs.csv", &["snr_db", "seed", "vexpa_order"], run_rows)?,
    ];
    let metadata = meta(&[
        ("rate", grid.omega_rate().into()),
        ("samples", grid.count.into()),
        ("snr_db", serde_json::to_value(&snrs)?),
        ("seeds", seeds.len().into()),
        ("config", serde_json::to_value(&cfg)?),
    ]);
    Ok(Report::new(ExperimentName::HighNoise, checks, metadata, failures, tables))
}

fn crlb_curves(spec: &ExperimentSpec) -> Result<Report> {
    let model = spec.model_or(presets::toy);
    let rate = spec.rate.unwrap_or(presets::TOY_RATE);
    let snrs = spec
        .snr_db
        .clone()
        .unwrap_or_else(|| (0..=8).rev().map(|i| 5.0 * i as f64).collect());
    let setups = [(10.0, 200usize), (1.0, 200), (10.0, 20)];
    let grids: Vec<_> = setups
        .iter()
        .map(|&(m, count)| SamplingGrid::new(m / rate, count))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut ordered = 0usize;
    for &snr in &snrs {
        let vals: Vec<f64> = grids
            .iter()
            .map(|g| crlb(&model, g, noise_variance(&model, g, snr)).map(|r| r.rms_omega))
            .collect::<Result<_>>()?;
        if vals[0] < vals[1] && vals[1] < vals[2] {
            ordered += 1;
        }
        rows.push(std::iter::once(snr.to_string()).chain(vals.iter().map(|v| fmt(*v))).collect());
    }
    let checks = vec![Check::at_least("ordered_fraction", ordered as f64 / snrs.len() as f64, 1.0)];
    let tables = vec![table("crlb.csv", &["snr_db", "d10_n200", "d1_n200", "d10_n20"], rows)?];
    let metadata = meta(&[("rate", rate.into()), ("snr_db", serde_json::to_value(&snrs)?)]);
    Ok(Report::new(ExperimentName::CrlbCurves, checks, metadata, Vec::new(), tables))
}

fn disposedness_toy(spec: &ExperimentSpec) -> Result<Report> {
    let model = spec.model_or(presets::toy);
    let rate = spec.rate.unwrap_or(presets::TOY_RATE);
    let one = disposedness(&model, 1.0 / rate, 1)?;
    let ten = disposedness(&model, 1.0 / rate, 10)?;
    let rows = one
        .entries
        .iter()
        .zip(&ten.entries)
        .enumerate()
        .map(|(i, (a, b))| vec![i.to_string(), fmt(a.bound), fmt(b.bound)])
        .collect();
    let checks = vec![Check::at_least("min_u1_over_max_u10", one.min_bound() / ten.max_bound(), 1.0)];
    let tables = vec![table("disposedness.csv", &["i", "rho_u1", "rho_u10"], rows)?];
    let metadata = meta(&[("rate", rate.into())]);
    Ok(Report::new(ExperimentName::DisposednessToy, checks, metadata, Vec::new(), tables))
}

fn collision_demo(spec: &ExperimentSpec) -> Result<Report> {
    let model = spec.model_or(presets::collision);
    let grid = spec.grid(presets::COLLISION_RATE, 300)?;
    let snr = spec.snr_db.as_ref().and_then(|v| v.first().copied()).unwrap_or(40.0);
    let cfg = spec.config.clone().unwrap_or_else(|| VexpaConfig::with_us(10, 3));
    let seeds = spec.seeds()?;
    cfg.validate(grid.count)?;
    let n = model.order();
    let clean = sample(&model, &grid);
    let freq_err = |terms: &[ExponentialTerm<f64>]| -> f64 {
        let errs = frequency_errors(terms, &model);
        if terms.len() != n || errs.len() != n {
            return f64::INFINITY;
        }
        errs.iter().map(|p| p.2 / (2.0 * PI)).fold(0.0, f64::max)
    };
    let mut failures = Vec::new();
    let clean_err = match run_vexpa(&clean, &cfg) {
        Ok(r) => freq_err(&r.exponential_terms()),
        Err(e) => {
            failures.push(format!("noisefree: {e}"));
            f64::INFINITY
        }
    };
    let errs: Vec<std::result::Result<f64, String>> = seeds
        .par_iter()
        .map(|&seed| {
            let data = noisy(&clean, snr, seed).map_err(|e| e.to_string())?;
            run_vexpa(&data, &cfg).map(|r| freq_err(&r.exponential_terms())).map_err(|e| e.to_string())
        })
        .collect();
    let mut rows = Vec::new();
    let mut good = 0usize;
    for (seed, e) in seeds.iter().zip(&errs) {
        match e {
            Ok(e) => {
                if *e <= 1e-2 {
                    good += 1;
                }
                rows.push(vec![seed.to_string(), fmt(*e)]);
            }
            Err(msg) => {
                failures.push(format!("seed {seed}: {msg}"));
                rows.push(vec![seed.to_string(), "error".into()]);
            }
        }
    }
    let checks = vec![
        Check::at_most("noisefree_max_freq_error", clean_err, 1e-8),
        Check::at_least("noisy_success_rate", good as f64 / seeds.len() as f64, 0.9),
    ];
    let tables = vec![table("runs.csv", &["seed", "max_freq_error"], rows)?];
    let metadata = meta(&[
        ("rate", grid.omega_rate().into()),
        ("samples", grid.count.into()),
        ("snr_db", snr.into()),
        ("seeds", seeds.len().into()),
        ("config", serde_json::to_value(&cfg)?),
    ]);
    Ok(Report::new(ExperimentName::CollisionDemo, checks, metadata, failures, tables))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        let s = ExperimentSpec::from_json_str(r#"{"name":"high_noise","seeds":[1,2],"snr_db":[40]}"#).unwrap();
        assert_eq!(s.name, ExperimentName::HighNoise);
        assert!(ExperimentSpec::from_json_str(r#"{"name":"nope"}"#).is_err());
        assert!(ExperimentSpec::from_json_str(r#"{"name":"outlier","bogus":1}"#).is_err());
        let mut empty = ExperimentSpec::new(ExperimentName::Outlier);
        empty.seeds = Some(vec![]);
        assert!(run_experiment(&empty).is_err());
    }

    #[test]
    fn median_and_rms() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert!((rms(&[3.0, 4.0]) - (12.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_tables_are_stable() {
        let r = run_experiment(&ExperimentSpec::new(ExperimentName::DisposednessToy)).unwrap();
        assert!(r.summary.passed);
        assert_eq!(r.table("disposedness.csv").unwrap().lines().count(), 11);
        let again = run_experiment(&ExperimentSpec::new(ExperimentName::DisposednessToy)).unwrap();
        assert_eq!(r, again);
    }
}
