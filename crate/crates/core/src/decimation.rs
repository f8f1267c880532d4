//! Decimation of the sample stream and recovery from the aliasing it causes.
//!
//! Decimating by `u` maps every node `lambda` to `lambda^u`, which only
//! determines `lambda` up to a `u`-th root of unity. Sampling the same
//! decimation again after a shift of `s` samples (with `gcd(u, s) = 1`)
//! multiplies each amplitude by `lambda^s`; the shared root of both candidate
//! sets is the unaliased node. Repeating the shift `M` times gives a short
//! exponential sequence per node whose Prony analysis stabilises `lambda^s`
//! and separates nodes that collided under decimation.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VexpaError};
use crate::prony::{self, fit_amplitudes, sort_by_amplitude};
use crate::scalar::{cabs, cpowi, croots, gcd, Real};

/// The samples `values[u j + k]` for `j < min(N / u, (N - k) / u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecimationSet<T> {
    pub k: usize,
    pub u: usize,
    pub indices: Vec<usize>,
    pub values: Vec<Complex<T>>,
}

impl<T> DecimationSet<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of samples in decimation `k` of `n` samples by `u`.
pub fn decimation_len(n: usize, u: usize, k: usize) -> usize {
    (n / u).min((n - k.min(n)) / u)
}

pub fn decimate<T: Real>(values: &[Complex<T>], u: usize) -> Result<Vec<DecimationSet<T>>> {
    let n = values.len();
    if u == 0 || 2 * u > n {
        return Err(VexpaError::InvalidConfig(format!(
            "undersampling {u} unusable for {n} samples"
        )));
    }
    Ok((0..u)
        .map(|k| {
            let indices: Vec<usize> = (0..decimation_len(n, u, k)).map(|j| u * j + k).collect();
            let values = indices.iter().map(|&i| values[i]).collect();
            DecimationSet { k, u, indices, values }
        })
        .collect())
}

/// Amplitudes `alpha_i lambda_i^(k + m s)` of one node across the shifts `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSequence<T> {
    pub term_index: usize,
    pub decimation_index: usize,
    pub s: usize,
    pub values: Vec<Complex<T>>,
}

/// Solves `values[m s + u j + k] = sum_i a_{m,i} z_i^j` for `m = 0..m_count`
/// in least squares over every in-range `j`, with `z_i` the decimated
/// eigenvalues, and regroups the coefficients per node.
pub fn shifted_amplitudes<T: Real>(
    values: &[Complex<T>],
    k: usize,
    u: usize,
    s: usize,
    m_count: usize,
    eigenvalues: &[Complex<T>],
) -> Result<Vec<ShiftSequence<T>>> {
    if u == 0 || gcd(u, s) != 1 {
        return Err(VexpaError::NotCoprime { u, s });
    }
    if m_count < 2 {
        return Err(VexpaError::InvalidConfig("need at least two shifts".into()));
    }
    let n = eigenvalues.len();
    let mut per_shift = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let offset = m * s + k;
        let rhs = prony::stride(values, u, offset);
        if rhs.len() < n {
            return Err(VexpaError::InsufficientSamples {
                needed: n,
                available: rhs.len(),
            });
        }
        let powers: Vec<usize> = (0..rhs.len()).collect();
        per_shift.push(fit_amplitudes(eigenvalues, &powers, &rhs)?.amplitudes);
    }
    Ok((0..n)
        .map(|i| ShiftSequence {
            term_index: i,
            decimation_index: k,
            s,
            values: per_shift.iter().map(|a| a[i]).collect(),
        })
        .collect())
}

/// Prony analysis of a shift sequence with `collision_order` terms.
///
/// Returns `(lambda^s, amplitude)` pairs by decreasing amplitude. Directions
/// with numerically zero singular values are dropped, so noisefree single-term
/// sequences yield exactly one pair.
pub fn recover_shift_eigenvalues<T: Real>(
    seq: &ShiftSequence<T>,
    collision_order: usize,
) -> Result<Vec<(Complex<T>, Complex<T>)>> {
    let m = seq.values.len();
    if collision_order == 0 || 2 * collision_order > m {
        return Err(VexpaError::InvalidConfig(format!(
            "collision order {collision_order} needs at least {} shifts, have {m}",
            2 * collision_order.max(1)
        )));
    }
    let peak = seq.values.iter().map(|v| cabs(*v)).fold(T::zero(), |a, b| a.max(b));
    if !(peak > T::min_value().unwrap_or_else(T::zero)) || !peak.is_finite() {
        return Err(VexpaError::DegenerateSequence);
    }
    let nodes = prony::esprit_nodes_clipped(&seq.values, collision_order)?;
    let powers: Vec<usize> = (0..m).collect();
    let fit = fit_amplitudes(&nodes, &powers, &seq.values)?;
    let mut pairs: Vec<_> = nodes.into_iter().zip(fit.amplitudes).collect();
    sort_by_amplitude(&mut pairs);
    Ok(pairs)
}

/// Keeps the pairs whose amplitude is at least `theta` times the largest.
pub fn dominant<T: Real>(pairs: &[(Complex<T>, Complex<T>)], theta: T) -> Vec<(Complex<T>, Complex<T>)> {
    let peak = pairs.iter().map(|p| cabs(p.1)).fold(T::zero(), |a, b| a.max(b));
    pairs
        .iter()
        .filter(|p| cabs(p.1) >= theta * peak)
        .copied()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSets<T> {
    pub u_set: Vec<Complex<T>>,
    pub s_set: Vec<Complex<T>>,
    pub matched: Complex<T>,
    pub best_distance: T,
    pub second_distance: T,
    /// The runner-up pair lies within twice the best distance.
    pub low_confidence: bool,
}

/// Intersects the `u`-th roots of `u_lambda` with the `s`-th roots of
/// `s_lambda`; the closest pair wins and its `U` element is returned.
pub fn candidate_sets<T: Real>(u_lambda: Complex<T>, s_lambda: Complex<T>, u: usize, s: usize) -> CandidateSets<T> {
    let u_set = croots(u_lambda, u.max(1));
    let s_set = croots(s_lambda, s.max(1));
    let inf = T::max_value().unwrap_or_else(T::one);
    let mut best = (inf, 0usize);
    let mut second = inf;
    for (a_idx, a) in u_set.iter().enumerate() {
        for b in &s_set {
            let d = cabs(a - b);
            if d < best.0 {
                second = best.0;
                best = (d, a_idx);
            } else if d < second {
                second = d;
            }
        }
    }
    let low_confidence = u_set.len() * s_set.len() > 1 && second < T::of(2.0) * best.0;
    CandidateSets {
        matched: u_set[best.1],
        best_distance: best.0,
        second_distance: second,
        low_confidence,
        u_set,
        s_set,
    }
}

/// Integers `(w, r)` with `w u + r s = 1` minimising `|w| + |r|`.
pub fn bezout(u: usize, s: usize) -> Result<(i64, i64)> {
    if gcd(u, s) != 1 {
        return Err(VexpaError::NotCoprime { u, s });
    }
    let (ui, si) = (u as i64, s as i64);
    let (mut old_r, mut r) = (ui, si);
    let (mut old_w, mut w) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_w, w) = (w, old_w - q * w);
        (old_t, t) = (t, old_t - q * t);
    }
    // general solution (old_w + k s, old_t - k u)
    let cost = |k: i64| (old_w + k * si).abs() + (old_t - k * ui).abs();
    let centre = if si > 0 { -old_w / si } else { 0 };
    let best = (centre - 2..=centre + 2).min_by_key(|&k| (cost(k), k.abs())).unwrap_or(0);
    Ok((old_w + best * si, old_t - best * ui))
}

/// `u_lambda^w * s_lambda^r` with `w u + r s = 1`.
pub fn euclid_recover<T: Real>(u_lambda: Complex<T>, s_lambda: Complex<T>, u: usize, s: usize) -> Result<Complex<T>> {
    let (w, r) = bezout(u, s)?;
    Ok(cpowi(u_lambda, w) * cpowi(s_lambda, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStrategy {
    /// Closest pair between the root sets, `lambda^s` from a single shift.
    Distance,
    /// Bezout combination of `lambda^u` and a single-shift `lambda^s`.
    Euclid,
    /// Prony over `M` shifts, then closest-pair matching.
    #[default]
    Stabilized,
}

/// `(lambda^s, amplitude)` estimates from a shift sequence as used by each
/// strategy: the two-shift ratio for `Distance` and `Euclid`, the dominant
/// Prony terms for `Stabilized`.
pub fn shift_eigenvalues<T: Real>(
    seq: &ShiftSequence<T>,
    strategy: RecoveryStrategy,
    collision_order: usize,
    theta: T,
) -> Result<Vec<(Complex<T>, Complex<T>)>> {
    match strategy {
        RecoveryStrategy::Distance | RecoveryStrategy::Euclid => {
            if seq.values.len() < 2 {
                return Err(VexpaError::InvalidConfig("need at least two shifts".into()));
            }
            let a0 = seq.values[0];
            if !(cabs(a0) > T::zero()) {
                return Err(VexpaError::DegenerateSequence);
            }
            Ok(vec![(seq.values[1] / a0, a0)])
        }
        RecoveryStrategy::Stabilized => {
            let pairs = recover_shift_eigenvalues(seq, collision_order)?;
            Ok(dominant(&pairs, theta))
        }
    }
}

/// One unaliased node per shift eigenvalue of a decimated node.
pub fn recover_term<T: Real>(
    u_lambda: Complex<T>,
    shift_results: &[(Complex<T>, Complex<T>)],
    u: usize,
    s: usize,
    strategy: RecoveryStrategy,
) -> Result<Vec<(Complex<T>, Complex<T>)>> {
    if gcd(u, s) != 1 {
        return Err(VexpaError::NotCoprime { u, s });
    }
    shift_results
        .iter()
        .map(|&(s_lambda, amp)| {
            let lambda = match strategy {
                RecoveryStrategy::Euclid => euclid_recover(u_lambda, s_lambda, u, s)?,
                RecoveryStrategy::Distance | RecoveryStrategy::Stabilized => {
                    candidate_sets(u_lambda, s_lambda, u, s).matched
                }
            };
            Ok((lambda, amp))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::scalar::cexp;
    use crate::signal::{add_noise, sample, ExponentialTerm, SamplingGrid, SignalModel};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn unit(f: f64) -> Complex<f64> {
        cexp(c(0.0, 2.0 * PI * f))
    }

    #[test]
    fn decimation_sizes() {
        let v = vec![c(0.0, 0.0); 300];
        let sets = decimate(&v, 7).unwrap();
        assert_eq!(sets.len(), 7);
        assert!(sets.iter().all(|d| d.len() == 42 || d.len() == 41));
        let seven = vec![c(0.0, 0.0); 7];
        let sizes: Vec<_> = decimate(&seven, 3).unwrap().iter().map(|d| d.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let ten: Vec<_> = (0..10).map(|k| c(k as f64, 0.0)).collect();
        let id = decimate(&ten, 1).unwrap();
        assert_eq!(id.len(), 1);
        assert_eq!(id[0].values, ten);
        assert!(decimate(&ten, 6).is_err());
        for d in &sets {
            assert!(d.indices.windows(2).all(|w| w[1] == w[0] + 7));
        }
    }

    fn single(beta: f64, psi: f64, f: f64, n: usize) -> (SignalModel<f64>, Vec<Complex<f64>>) {
        let m = SignalModel::new(vec![ExponentialTerm::new(beta, 0.4, psi, 2.0 * PI * f).unwrap()]).unwrap();
        let s = sample(&m, &SamplingGrid::new(1.0, n).unwrap());
        (m, s.values)
    }

    #[test]
    fn shift_sequence_follows_closed_form() {
        let (m, v) = single(1.5, -0.01, 0.137, 200);
        let term = m.terms[0];
        let (u, s, k) = (7, 11, 3);
        let z = cpowi(term.node(1.0), u as i64);
        let seqs = shifted_amplitudes(&v, k, u, s, 8, &[z]).unwrap();
        let first = prony::solve_amplitudes(&v, u, k, &[z]).unwrap();
        assert_eq!(seqs[0].values[0], first.amplitudes[0]);
        for (mi, a) in seqs[0].values.iter().enumerate() {
            let want = term.alpha() * cexp(term.mu() * (k + mi * s) as f64);
            assert!(cabs(a - want) < 1e-10);
        }
        let ratio = seqs[0].values[3] / seqs[0].values[2];
        assert!(cabs(ratio - cpowi(term.node(1.0), s as i64)) < 1e-10);
    }

    #[test]
    fn shift_errors() {
        let (_, v) = single(1.0, 0.0, 0.1, 50);
        assert!(matches!(shifted_amplitudes(&v, 0, 6, 4, 8, &[c(1.0, 0.0)]), Err(VexpaError::NotCoprime { .. })));
        assert!(matches!(
            shifted_amplitudes(&v, 0, 7, 11, 8, &[c(1.0, 0.0)]),
            Err(VexpaError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn single_term_shift_eigenvalue() {
        let (m, v) = single(1.0, 0.0, 0.0731, 300);
        let z = cpowi(m.terms[0].node(1.0), 7);
        let seq = &shifted_amplitudes(&v, 2, 7, 11, 8, &[z]).unwrap()[0];
        let pairs = recover_shift_eigenvalues(seq, 1).unwrap();
        assert!(cabs(pairs[0].0 - cpowi(m.terms[0].node(1.0), 11)) < 1e-10);
    }

    #[test]
    fn noisy_single_term_has_one_dominant_shift_term() {
        let (m, _) = single(1.0, 0.0, 0.0731, 300);
        let clean = sample(&m, &SamplingGrid::new(1.0, 300).unwrap());
        let noisy = add_noise(&clean, 40.0, 5).unwrap();
        let z = cpowi(m.terms[0].node(1.0), 7);
        let seq = &shifted_amplitudes(&noisy.values, 0, 7, 11, 8, &[z]).unwrap()[0];
        let pairs = recover_shift_eigenvalues(seq, 2).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(cabs(pairs[1].1) < 0.1 * cabs(pairs[0].1));
        assert_eq!(dominant(&pairs, 0.1).len(), 1);
    }

    #[test]
    fn degenerate_sequence_flagged() {
        let seq = ShiftSequence {
            term_index: 0,
            decimation_index: 0,
            s: 3,
            values: vec![c(0.0, 0.0); 8],
        };
        assert!(matches!(recover_shift_eigenvalues(&seq, 4), Err(VexpaError::DegenerateSequence)));
        assert!(recover_shift_eigenvalues(&seq, 5).is_err());
    }

    #[test]
    fn collision_is_split_by_shifts() {
        let model = presets::collision::<f64>();
        let grid = SamplingGrid::from_rate(presets::COLLISION_RATE, 300).unwrap();
        let v = sample(&model, &grid).values;
        let z = unit(0.3);
        let seq = &shifted_amplitudes(&v, 0, 10, 3, 8, &[z]).unwrap()[0];
        assert!(cabs(seq.values[0] - c(2.0, 0.0)) < 1e-10);
        let pairs = recover_shift_eigenvalues(seq, 4).unwrap();
        let dom = dominant(&pairs, 0.1);
        assert_eq!(dom.len(), 2);
        for p in &dom {
            assert!((cabs(p.1) - 1.0).abs() < 1e-8);
        }
        let total: Complex<f64> = dom.iter().map(|p| p.1).sum();
        assert!(cabs(total - seq.values[0]) < 1e-8);
        let mut rec = recover_term(z, &dom, 10, 3, RecoveryStrategy::Stabilized).unwrap();
        rec.sort_by(|a, b| crate::scalar::carg(a.0).partial_cmp(&crate::scalar::carg(b.0)).unwrap());
        assert!(cabs(rec[0].0 - unit(0.13)) < 1e-8);
        assert!(cabs(rec[1].0 - unit(0.33)) < 1e-8);
    }

    #[test]
    fn candidate_matching() {
        let l = unit(0.21);
        let cs = candidate_sets(l, l, 1, 1);
        assert_eq!(cs.u_set.len(), 1);
        assert!(cabs(cs.matched - l) < 1e-15);

        let l = unit(0.13);
        let cs = candidate_sets(cpowi(l, 9), cpowi(l, 4), 9, 4);
        assert_eq!((cs.u_set.len(), cs.s_set.len()), (9, 4));
        assert!(cabs(cs.matched - l) < 1e-10);
        assert!(!cs.low_confidence);

        let l2 = unit(0.33);
        let cs = candidate_sets(unit(0.3), cpowi(l2, 3), 10, 3);
        assert!(cabs(cs.matched - l2) < 1e-10);
    }

    #[test]
    fn bezout_coefficients() {
        assert_eq!(bezout(10, 3).unwrap(), (1, -3));
        let (w, r) = bezout(1, 1).unwrap();
        assert_eq!(w + r, 1);
        assert_eq!(w.abs() + r.abs(), 1);
        for u in 1..20usize {
            for s in 1..20usize {
                if gcd(u, s) == 1 {
                    let (w, r) = bezout(u, s).unwrap();
                    assert_eq!(w * u as i64 + r * s as i64, 1);
                }
            }
        }
        assert!(bezout(6, 4).is_err());
    }

    #[test]
    fn euclid_amplifies_perturbations() {
        let l = unit(0.3871);
        let (u, s) = (7, 11);
        let got = euclid_recover(cpowi(l, 7), cpowi(l, 11), u, s).unwrap();
        assert!(cabs(got - l) < 1e-9);
        let (w, r) = bezout(u, s).unwrap();
        let eps = 1e-3;
        let got = euclid_recover(cpowi(l, 7) * cexp(c(0.0, eps)), cpowi(l, 11), u, s).unwrap();
        let err = cabs(got - l);
        assert!(err > 0.5 * eps * w.abs() as f64 && err < 1.5 * eps * w.abs() as f64, "{err}");
        let got = euclid_recover(cpowi(l, 7), cpowi(l, 11) * cexp(c(0.0, eps)), u, s).unwrap();
        let err = cabs(got - l);
        assert!(err > 0.5 * eps * r.abs() as f64 && err < 1.5 * eps * r.abs() as f64, "{err}");
    }

    #[test]
    fn strategies_agree_noisefree() {
        let (m, v) = single(1.0, -0.002, 0.0917, 300);
        let node = m.terms[0].node(1.0);
        let z = cpowi(node, 7);
        let seq = &shifted_amplitudes(&v, 1, 7, 11, 8, &[z]).unwrap()[0];
        let mut out = Vec::new();
        for strategy in [RecoveryStrategy::Distance, RecoveryStrategy::Euclid, RecoveryStrategy::Stabilized] {
            let sr = shift_eigenvalues(seq, strategy, 4, 0.1).unwrap();
            let rec = recover_term(z, &sr, 7, 11, strategy).unwrap();
            assert_eq!(rec.len(), 1);
            out.push(rec[0].0);
        }
        for w in &out {
            assert!(cabs(w - node) < 1e-9);
        }
    }
}
