//! End-to-end VEXPA analysis and the full-rate baseline.

use std::collections::BTreeSet;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    classify_and_validate, dbscan, default_delta, delta_cap, link_clusters, prune_per_decimation, DbscanParams, Point,
    Side,
    Unvalidated, ValidationRecord,
};
use crate::decimation::{decimate, decimation_len, shift_eigenvalues, shifted_amplitudes, DecimationSet, RecoveryStrategy};
use crate::error::{Result, VexpaError};
use crate::prony::{self, esprit_estimate, fit_amplitudes, solve_amplitudes, solve_gevp};
use crate::scalar::{cln, gcd, Real};
use crate::signal::{ExponentialTerm, SampleSet};

/// Largest over-model order chosen automatically.
pub const NU_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMethod {
    #[default]
    Esprit,
    Gevp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VexpaConfig {
    pub u: usize,
    pub s: usize,
    /// Number of shifts `M`.
    #[serde(alias = "M")]
    pub shifts: usize,
    /// Per-decimation over-model order; chosen from the data when absent.
    pub nu: Option<usize>,
    /// Each decimation keeps the rank at the largest singular-value drop plus
    /// this margin, at most `nu`; `null` keeps the full `nu`.
    pub rank_margin: Option<usize>,
    pub delta: Option<f64>,
    pub m_delta: Option<usize>,
    pub delta_s: Option<f64>,
    pub m_delta_s: Option<usize>,
    pub base_method: BaseMethod,
    pub strategy: RecoveryStrategy,
    /// Prony order on the shift sequences, `shifts / 2` when absent.
    pub collision_order: Option<usize>,
    /// Relative amplitude below which a shift term is treated as noise.
    pub theta: f64,
    /// Analyse decimations on the rayon pool.
    pub parallel: bool,
}

impl Default for VexpaConfig {
    fn default() -> Self {
        Self {
            u: 7,
            s: 11,
            shifts: 8,
            nu: None,
            rank_margin: Some(2),
            delta: None,
            m_delta: None,
            delta_s: None,
            m_delta_s: None,
            base_method: BaseMethod::Esprit,
            strategy: RecoveryStrategy::Stabilized,
            collision_order: None,
            theta: 0.1,
            parallel: true,
        }
    }
}

impl VexpaConfig {
    pub fn with_us(u: usize, s: usize) -> Self {
        Self { u, s, ..Self::default() }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rows left for the last shifted system of the last decimation.
    fn min_shift_rows(&self, n: usize) -> usize {
        let last = (self.shifts.saturating_sub(1)) * self.s + self.u - 1;
        if last >= n {
            0
        } else {
            (n - 1 - last) / self.u + 1
        }
    }

    /// The over-model order used for `n` samples.
    pub fn resolved_nu(&self, n: usize) -> usize {
        self.nu.unwrap_or_else(|| {
            let shortest = decimation_len(n, self.u.max(1), self.u.saturating_sub(1));
            (shortest / 2).min(NU_CAP).min(self.min_shift_rows(n))
        })
    }

    pub fn collision_order(&self) -> usize {
        self.collision_order.unwrap_or(self.shifts / 2)
    }

    pub fn m_delta(&self) -> usize {
        self.m_delta.unwrap_or(self.u.saturating_sub(1).max(1))
    }

    pub fn m_delta_s(&self) -> usize {
        self.m_delta_s.unwrap_or_else(|| self.m_delta().saturating_sub(2).max(2))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(VexpaError::InvalidConfig(msg));
        if self.u < 2 {
            return bad(format!("undersampling u = {} must be at least 2", self.u));
        }
        if self.s == 0 || gcd(self.u, self.s) != 1 {
            return Err(VexpaError::NotCoprime { u: self.u, s: self.s });
        }
        if self.shifts < 2 || self.shifts % 2 != 0 {
            return bad(format!("shift count {} must be even and at least 2", self.shifts));
        }
        let order = self.collision_order();
        if order == 0 || 2 * order > self.shifts {
            return bad(format!("collision order {order} does not fit {} shifts", self.shifts));
        }
        if !(self.theta >= 0.0 && self.theta <= 1.0) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        for (name, d) in [("delta", self.delta), ("delta_s", self.delta_s)] {
            if let Some(d) = d {
                if !(d > 0.0 && d.is_finite()) {
                    return bad(format!("{name} must be positive"));
                }
            }
        }
        if self.m_delta == Some(0) || self.m_delta_s == Some(0) {
            return bad("minimum cluster sizes must be positive".into());
        }
        if 2 * self.u > n {
            return bad(format!("u = {} too large for {n} samples", self.u));
        }
        let nu = self.resolved_nu(n);
        let per = n / self.u;
        if nu == 0 || 2 * nu > per {
            return bad(format!("over-model order {nu} needs {} samples per decimation, have {per}", 2 * nu.max(1)));
        }
        let rows = self.min_shift_rows(n);
        if rows < nu {
            return Err(VexpaError::InsufficientSamples { needed: nu, available: rows });
        }
        Ok(())
    }
}

/// Eigenvalue estimates contributed by one decimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationOutcome<T> {
    pub k: usize,
    /// `(i, lambda^u)` per term.
    pub u_values: Vec<(usize, Complex<T>)>,
    /// `(i, lambda^s, amplitude)`; several per term after a collision.
    pub s_values: Vec<(usize, Complex<T>, Complex<T>)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedTerm<T> {
    pub term: ExponentialTerm<T>,
    pub record: ValidationRecord<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics<T> {
    pub nu: usize,
    pub delta: T,
    pub m_delta: usize,
    pub delta_s: T,
    pub m_delta_s: usize,
    pub u_noise: usize,
    pub s_noise: usize,
    pub dangling: usize,
    pub unvalidated: Vec<Unvalidated<T>>,
    pub decimation_errors: Vec<(usize, String)>,
    pub excluded_decimations: Vec<usize>,
    pub amplitude_rcond: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VexpaResult<T> {
    pub terms: Vec<ValidatedTerm<T>>,
    pub model_order: usize,
    pub diagnostics: Diagnostics<T>,
    pub u_points: Vec<Point<T>>,
    pub s_points: Vec<Point<T>>,
    pub config: VexpaConfig,
}

impl<T: Real> VexpaResult<T> {
    pub fn exponential_terms(&self) -> Vec<ExponentialTerm<T>> {
        self.terms.iter().map(|t| t.term).collect()
    }
}

fn analyse_decimation<T: Real>(
    values: &[Complex<T>],
    set: &DecimationSet<T>,
    cfg: &VexpaConfig,
    nu: usize,
) -> DecimationOutcome<T> {
    let mut out = DecimationOutcome {
        k: set.k,
        u_values: Vec::new(),
        s_values: Vec::new(),
        error: None,
    };
    let eig = match cfg.base_method {
        // numerically null directions carry no information; dropping them
        // keeps noisefree runs free of arbitrary eigenvalues
        BaseMethod::Esprit => match cfg.rank_margin {
            Some(m) => prony::esprit_nodes_gap(&set.values, nu, m),
            None => prony::esprit_nodes_clipped(&set.values, nu),
        },
        BaseMethod::Gevp => solve_gevp(&set.values, 1, nu).map(|e| e.into_iter().map(|x| x.value).collect()),
    };
    let eig = match eig {
        Ok(e) => e,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let seqs = match shifted_amplitudes(values, set.k, cfg.u, cfg.s, cfg.shifts, &eig) {
        Ok(s) => s,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let theta = T::of(cfg.theta);
    for (i, (z, seq)) in eig.iter().zip(&seqs).enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            continue;
        }
        out.u_values.push((i, *z));
        if let Ok(pairs) = shift_eigenvalues(seq, cfg.strategy, cfg.collision_order(), theta) {
            for (sl, amp) in pairs {
                if sl.re.is_finite() && sl.im.is_finite() {
                    out.s_values.push((i, sl, amp));
                }
            }
        }
    }
    out
}

/// Per-decimation stage of [`run_vexpa`], ordered by `k`.
pub fn analyse_decimations<T: Real>(samples: &SampleSet<T>, cfg: &VexpaConfig) -> Result<Vec<DecimationOutcome<T>>> {
    cfg.validate(samples.len())?;
    let nu = cfg.resolved_nu(samples.len());
    let sets = decimate(&samples.values, cfg.u)?;
    let values = &samples.values;
    Ok(if cfg.parallel {
        sets.par_iter().map(|d| analyse_decimation(values, d, cfg, nu)).collect()
    } else {
        sets.iter().map(|d| analyse_decimation(values, d, cfg, nu)).collect()
    })
}

/// Full VEXPA analysis: decimate, analyse, cluster, validate, and re-solve
/// the amplitudes on the decimations every validated cluster agrees on.
pub fn run_vexpa<T: Real>(samples: &SampleSet<T>, cfg: &VexpaConfig) -> Result<VexpaResult<T>> {
    let outcomes = analyse_decimations(samples, cfg)?;
    let nu = cfg.resolved_nu(samples.len());
    let mut u_points = Vec::new();
    let mut s_points = Vec::new();
    let mut decimation_errors = Vec::new();
    for o in &outcomes {
        if let Some(e) = &o.error {
            decimation_errors.push((o.k, e.clone()));
        }
        u_points.extend(o.u_values.iter().map(|&(i, value)| Point { value, k: o.k, i, side: Side::U }));
        s_points.extend(o.s_values.iter().map(|&(i, value, _)| Point { value, k: o.k, i, side: Side::S }));
    }
    let u_vals: Vec<_> = u_points.iter().map(|p| p.value).collect();
    let s_vals: Vec<_> = s_points.iter().map(|p| p.value).collect();
    let m_delta = cfg.m_delta();
    let m_delta_s = cfg.m_delta_s();
    let delta = cfg
        .delta
        .map(T::of)
        .unwrap_or_else(|| default_delta(&u_vals, m_delta, delta_cap(cfg.u)));
    let delta_s = cfg
        .delta_s
        .map(T::of)
        .unwrap_or_else(|| {
            // angular spread on the s side grows by s/u
            let cap = delta_cap::<T>(cfg.s);
            let floor = (delta * T::of(cfg.s as f64 / cfg.u as f64)).min(cap);
            default_delta(&s_vals, m_delta_s, cap).max(floor)
        });

    let u_ks: Vec<usize> = u_points.iter().map(|p| p.k).collect();
    let u_clusters = prune_per_decimation(dbscan(&u_vals, delta, m_delta), &u_vals, &u_ks, m_delta);
    let linkage = link_clusters(&u_points, &u_clusters, &s_points, DbscanParams { delta: delta_s, m_delta: m_delta_s });
    let validation = classify_and_validate(&linkage, &u_points, &s_points, cfg.u, cfg.s, cfg.strategy)?;
    let s_noise = linkage.linked.iter().map(|l| l.s_clustering.noise.len()).sum();

    let mut excluded = BTreeSet::new();
    for r in &validation.records {
        let present: BTreeSet<usize> = r.decimations.iter().copied().collect();
        excluded.extend((0..cfg.u).filter(|k| !present.contains(k)));
    }
    let mut diagnostics = Diagnostics {
        nu,
        delta,
        m_delta,
        delta_s,
        m_delta_s,
        u_noise: u_clusters.noise.len(),
        s_noise,
        dangling: linkage.dangling.len(),
        unvalidated: validation.unvalidated.clone(),
        decimation_errors,
        excluded_decimations: Vec::new(),
        amplitude_rcond: None,
    };

    let records = validation.records;
    let lambdas: Vec<_> = records.iter().map(|r| r.lambda).collect();
    let mut terms = Vec::new();
    if !lambdas.is_empty() {
        let fit = match final_amplitudes(samples, &lambdas, &excluded, cfg.u) {
            Ok(f) => {
                diagnostics.excluded_decimations = excluded.into_iter().collect();
                f
            }
            Err(_) => final_amplitudes(samples, &lambdas, &BTreeSet::new(), cfg.u)?,
        };
        diagnostics.amplitude_rcond = Some(fit.rcond);
        let dt = samples.grid.delta;
        for (r, alpha) in records.into_iter().zip(fit.amplitudes) {
            let mu = cln(r.lambda) / dt;
            terms.push(ValidatedTerm {
                term: ExponentialTerm::from_complex(alpha, mu),
                record: r,
            });
        }
    }
    Ok(VexpaResult {
        model_order: terms.len(),
        terms,
        diagnostics,
        u_points,
        s_points,
        config: cfg.clone(),
    })
}

/// Least-squares amplitudes over every sample whose index is not in an
/// excluded decimation.
pub fn final_amplitudes<T: Real>(
    samples: &SampleSet<T>,
    lambdas: &[Complex<T>],
    excluded: &BTreeSet<usize>,
    u: usize,
) -> Result<prony::AmplitudeFit<T>> {
    if lambdas.is_empty() {
        return Err(VexpaError::InvalidModel("no terms to fit".into()));
    }
    let u = u.max(1);
    let powers: Vec<usize> = (0..samples.len()).filter(|j| !excluded.contains(&(j % u))).collect();
    if powers.len() < lambdas.len() {
        return Err(VexpaError::Underdetermined {
            rows: powers.len(),
            unknowns: lambdas.len(),
        });
    }
    let rhs: Vec<_> = powers.iter().map(|&j| samples.values[j]).collect();
    fit_amplitudes(lambdas, &powers, &rhs)
}

/// Full-rate single-shot analysis with the model order supplied.
pub fn run_baseline<T: Real>(samples: &SampleSet<T>, n: usize, method: BaseMethod) -> Result<Vec<ExponentialTerm<T>>> {
    if n == 0 {
        return Err(VexpaError::InvalidConfig("model order must be positive".into()));
    }
    if 2 * n > samples.len() {
        return Err(VexpaError::InsufficientSamples {
            needed: 2 * n,
            available: samples.len(),
        });
    }
    let nodes: Vec<_> = match method {
        BaseMethod::Esprit => esprit_estimate(&samples.values, 1, 0, Some(n), n)?,
        BaseMethod::Gevp => solve_gevp(&samples.values, 1, n)?,
    }
    .into_iter()
    .map(|e| e.value)
    .collect();
    let fit = solve_amplitudes(&samples.values, 1, 0, &nodes)?;
    let dt = samples.grid.delta;
    Ok(nodes
        .iter()
        .zip(fit.amplitudes)
        .map(|(z, a)| ExponentialTerm::from_complex(a, cln(*z) / dt))
        .collect())
}

/// Pairs of `(estimate, truth)` indices minimising the summed `|a - b|`.
///
/// Every element of the smaller list is matched once; exact by dynamic
/// programming over subsets of the smaller list, which must not exceed 20.
pub fn match_terms(estimates: &[f64], truth: &[f64]) -> Vec<(usize, usize)> {
    let swap = estimates.len() < truth.len();
    let (rows, cols) = if swap { (truth, estimates) } else { (estimates, truth) };
    let m = cols.len();
    assert!(m <= 20, "too many terms to match");
    if m == 0 {
        return Vec::new();
    }
    let full = (1usize << m) - 1;
    let inf = f64::INFINITY;
    // dp[r][mask]: best cost using the first r rows covering mask
    let mut dp = vec![vec![inf; full + 1]; rows.len() + 1];
    dp[0][0] = 0.0;
    for r in 0..rows.len() {
        for mask in 0..=full {
            let cur = dp[r][mask];
            if cur == inf {
                continue;
            }
            if cur < dp[r + 1][mask] {
                dp[r + 1][mask] = cur;
            }
            for c in 0..m {
                if mask & (1 << c) == 0 {
                    let next = mask | (1 << c);
                    let cost = cur + (rows[r] - cols[c]).abs();
                    if cost < dp[r + 1][next] {
                        dp[r + 1][next] = cost;
                    }
                }
            }
        }
    }
    let mut pairs = Vec::new();
    let mut mask = full;
    for r in (0..rows.len()).rev() {
        if dp[r + 1][mask] == dp[r][mask] {
            continue;
        }
        let c = (0..m)
            .find(|&c| mask & (1 << c) != 0 && dp[r][mask ^ (1 << c)] + (rows[r] - cols[c]).abs() == dp[r + 1][mask])
            .expect("consistent table");
        pairs.push(if swap { (c, r) } else { (r, c) });
        mask ^= 1 << c;
    }
    pairs.sort_unstable();
    pairs
}
