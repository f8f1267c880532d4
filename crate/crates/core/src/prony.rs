//! Prony-type estimation on (possibly decimated) uniform samples.
//!
//! Two eigenvalue estimators are provided: the square pencil
//! `(H(s = u), H(s = 0))` built from Hankel matrices with stride `u`, and a
//! least-squares ESPRIT on a balanced rectangular Hankel matrix. Amplitudes
//! follow from a Vandermonde least-squares fit.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VexpaError};
use crate::linalg::{self, CMatrix};
use crate::scalar::{cabs, Real};

/// Hankel layout: entry `(p, q)` reads sample `shift + (p + q) * undersampling`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HankelSpec {
    pub shift: usize,
    pub undersampling: usize,
    pub order: usize,
}

impl HankelSpec {
    pub fn new(shift: usize, undersampling: usize, order: usize) -> Self {
        Self {
            shift,
            undersampling,
            order,
        }
    }

    /// Largest sample index touched by the square matrix.
    pub fn max_index(&self) -> usize {
        self.shift + (2 * self.order).saturating_sub(2) * self.undersampling
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenKind {
    UAliased,
    SAliased,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate<T> {
    pub value: Complex<T>,
    pub kind: EigenKind,
    pub term_index: usize,
    pub decimation_index: Option<usize>,
    pub amplitude: Complex<T>,
}

/// Amplitudes from a Vandermonde fit together with the fit's conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit<T> {
    pub amplitudes: Vec<Complex<T>>,
    pub rcond: T,
}

impl<T: Real> AmplitudeFit<T> {
    /// Reciprocal condition below which nodes are treated as nearly coincident.
    pub fn ill_conditioned(&self) -> bool {
        self.rcond < T::of(1e-10)
    }
}

pub fn build_hankel<T: Real>(values: &[Complex<T>], spec: HankelSpec) -> Result<CMatrix<T>> {
    if spec.order == 0 || spec.undersampling == 0 {
        return Err(VexpaError::InvalidConfig(
            "hankel order and undersampling must be positive".into(),
        ));
    }
    if spec.max_index() >= values.len() {
        return Err(VexpaError::InsufficientSamples {
            needed: spec.max_index() + 1,
            available: values.len(),
        });
    }
    let n = spec.order;
    Ok(DMatrix::from_fn(n, n, |p, q| {
        values[spec.shift + (p + q) * spec.undersampling]
    }))
}

/// Rectangular Hankel `H[p][q] = x[p + q]` with `rows + cols - 1 == x.len()`.
pub(crate) fn rect_hankel<T: Real>(x: &[Complex<T>], rows: usize) -> CMatrix<T> {
    let cols = x.len() + 1 - rows;
    DMatrix::from_fn(rows, cols, |p, q| x[p + q])
}

/// Every `u`-th sample starting at `offset`, as far as the data reaches.
pub(crate) fn stride<T: Real>(values: &[Complex<T>], u: usize, offset: usize) -> Vec<Complex<T>> {
    values.iter().skip(offset).step_by(u.max(1)).copied().collect()
}

fn label<T: Real>(
    nodes: Vec<Complex<T>>,
    fit: AmplitudeFit<T>,
    kind: EigenKind,
    decimation_index: Option<usize>,
) -> Vec<EigenEstimate<T>> {
    let mut pairs: Vec<_> = nodes.into_iter().zip(fit.amplitudes).collect();
    sort_by_amplitude(&mut pairs);
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (value, amplitude))| EigenEstimate {
            value,
            kind,
            term_index: i,
            decimation_index,
            amplitude,
        })
        .collect()
}

/// Orders `(node, amplitude)` pairs by decreasing `|amplitude|`.
pub(crate) fn sort_by_amplitude<T: Real>(pairs: &mut [(Complex<T>, Complex<T>)]) {
    pairs.sort_by(|a, b| {
        cabs(b.1)
            .partial_cmp(&cabs(a.1))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Square generalized eigenvalue problem `H(u, u) v = lambda H(0, u) v`.
///
/// For noisefree data of order `n` the eigenvalues are `exp(mu_i u delta)`.
pub fn solve_gevp<T: Real>(values: &[Complex<T>], u: usize, n: usize) -> Result<Vec<EigenEstimate<T>>> {
    if n == 0 || u == 0 {
        return Err(VexpaError::InvalidConfig("order and undersampling must be positive".into()));
    }
    if 2 * n * u > values.len() {
        return Err(VexpaError::InsufficientSamples {
            needed: 2 * n * u,
            available: values.len(),
        });
    }
    let h0 = build_hankel(values, HankelSpec::new(0, u, n))?;
    let h1 = build_hankel(values, HankelSpec::new(u, u, n))?;
    let nodes = pencil_eigenvalues(h1, h0)?;
    let fit = solve_amplitudes(values, u, 0, &nodes)?;
    let kind = if u > 1 { EigenKind::UAliased } else { EigenKind::Plain };
    Ok(label(nodes, fit, kind, None))
}

/// Eigenvalues of the square pencil `(a, b)` with `b` required nonsingular.
pub(crate) fn pencil_eigenvalues<T: Real>(a: CMatrix<T>, b: CMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = b.nrows();
    let sv = linalg::singular_values(b.clone())?;
    let smax = sv.first().copied().unwrap_or_else(T::zero);
    let smin = sv.last().copied().unwrap_or_else(T::zero);
    let rcond = if smax > T::zero() { smin / smax } else { T::zero() };
    if rcond <= T::default_epsilon() * T::of_usize(10 * n) {
        return Err(VexpaError::SingularPencil {
            rcond: rcond.to_f64_lossy(),
        });
    }
    let m = b.lu().solve(&a).ok_or(VexpaError::SingularPencil {
        rcond: rcond.to_f64_lossy(),
    })?;
    linalg::eigenvalues(m)
}

/// LS-ESPRIT node estimates of a sequence with a rank-`rank` signal subspace.
///
/// Fails with `RankDeficient` when the numerical rank of the data Hankel
/// matrix is below `required_rank`.
pub(crate) fn esprit_nodes<T: Real>(
    x: &[Complex<T>],
    rank: usize,
    required_rank: usize,
) -> Result<Vec<Complex<T>>> {
    esprit_core(x, rank, required_rank, RankRule::Fixed)
}

/// Like [`esprit_nodes`] but the rank is lowered to the numerical rank.
pub(crate) fn esprit_nodes_clipped<T: Real>(x: &[Complex<T>], rank: usize) -> Result<Vec<Complex<T>>> {
    esprit_core(x, rank, 1, RankRule::Clip)
}

/// Like [`esprit_nodes_clipped`] but the rank is the position of the largest
/// drop in the singular values plus `margin`, never above `rank`.
pub(crate) fn esprit_nodes_gap<T: Real>(x: &[Complex<T>], rank: usize, margin: usize) -> Result<Vec<Complex<T>>> {
    esprit_core(x, rank, 1, RankRule::Gap(margin))
}

#[derive(Clone, Copy)]
enum RankRule {
    Fixed,
    Clip,
    Gap(usize),
}

/// Number of leading singular values before the largest ratio
/// `sigma[i - 1] / sigma[i]`, searched over `1..=max`.
pub fn gap_rank<T: Real>(sigma: &[T], max: usize) -> usize {
    let top = max.min(sigma.len().saturating_sub(1));
    let mut best = (T::zero(), top.max(1));
    for i in 1..=top {
        let r = if sigma[i] > T::zero() {
            sigma[i - 1] / sigma[i]
        } else {
            T::max_value().unwrap_or_else(T::one)
        };
        if r > best.0 {
            best = (r, i);
        }
    }
    best.1
}

fn esprit_core<T: Real>(
    x: &[Complex<T>],
    rank: usize,
    required_rank: usize,
    rule: RankRule,
) -> Result<Vec<Complex<T>>> {
    let len = x.len();
    if rank == 0 {
        return Err(VexpaError::InvalidConfig("ESPRIT rank must be positive".into()));
    }
    if len < 2 * rank {
        return Err(VexpaError::InsufficientSamples {
            needed: 2 * rank,
            available: len,
        });
    }
    let rows = (len + 2) / 2;
    let h = rect_hankel(x, rows);
    let cols = h.ncols();
    let svd = linalg::svd(&h)?;
    let sigma = &svd.singular_values;
    let s1 = sigma[0];
    if !(s1 > T::zero()) {
        return Err(VexpaError::DegenerateSequence);
    }
    let tol = s1 * T::default_epsilon() * T::of_usize(rows.max(cols) * 10);
    let numerical_rank = sigma.iter().filter(|s| **s > tol).count();
    if numerical_rank < required_rank {
        return Err(VexpaError::RankDeficient {
            requested: required_rank,
            rank: numerical_rank,
        });
    }
    let rank = match rule {
        RankRule::Fixed => rank,
        RankRule::Clip => rank.min(numerical_rank),
        RankRule::Gap(margin) => (gap_rank(sigma, rank) + margin).min(rank).min(numerical_rank),
    };
    let basis = svd.u.columns(0, rank);
    let up = basis.rows(0, rows - 1).into_owned();
    let down = basis.rows(1, rows - 1).into_owned();
    let (phi, _) = linalg::lstsq_multi(&up, &down)?;
    linalg::eigenvalues(phi)
}

/// LS-ESPRIT on the stride-`u` subsequence starting at `offset`.
///
/// With a known order `n` the signal subspace is truncated to rank `n` and
/// `n` estimates are returned; with `n = None` the analysis runs over-modeled
/// at rank `nu` and returns `nu` estimates, of which only the physical ones
/// are expected to be stable across noise realisations.
pub fn esprit_estimate<T: Real>(
    values: &[Complex<T>],
    u: usize,
    offset: usize,
    n: Option<usize>,
    nu: usize,
) -> Result<Vec<EigenEstimate<T>>> {
    if u == 0 {
        return Err(VexpaError::InvalidConfig("undersampling must be positive".into()));
    }
    if let Some(n) = n {
        if nu < n {
            return Err(VexpaError::InvalidConfig(format!(
                "over-model order {nu} below model order {n}"
            )));
        }
    }
    let x = stride(values, u, offset);
    let rank = n.unwrap_or(nu);
    let nodes = esprit_nodes(&x, rank, n.unwrap_or(0))?;
    let fit = solve_amplitudes(values, u, offset, &nodes)?;
    let (kind, dec) = if u > 1 {
        (EigenKind::UAliased, Some(offset))
    } else {
        (EigenKind::Plain, None)
    };
    Ok(label(nodes, fit, kind, dec))
}

/// Least-squares amplitudes for `values[offset + u j] = sum_i alpha_i z_i^j`
/// over every `j` that stays inside the data.
pub fn solve_amplitudes<T: Real>(
    values: &[Complex<T>],
    u: usize,
    offset: usize,
    eigenvalues: &[Complex<T>],
) -> Result<AmplitudeFit<T>> {
    let x = stride(values, u, offset);
    let powers: Vec<usize> = (0..x.len()).collect();
    fit_amplitudes(eigenvalues, &powers, &x)
}

pub(crate) fn fit_amplitudes<T: Real>(
    nodes: &[Complex<T>],
    powers: &[usize],
    rhs: &[Complex<T>],
) -> Result<AmplitudeFit<T>> {
    let sol = linalg::vandermonde_lstsq(nodes, powers, rhs)?;
    Ok(AmplitudeFit {
        amplitudes: sol.x.iter().copied().collect(),
        rcond: sol.rcond,
    })
}

/// Number of singular values of the square Hankel matrix of size `nu_max`
/// above `rel_tol` times the largest one.
pub fn estimate_order_svd<T: Real>(values: &[Complex<T>], nu_max: usize, rel_tol: T) -> Result<usize> {
    if 2 * nu_max > values.len() {
        return Err(VexpaError::InsufficientSamples {
            needed: 2 * nu_max,
            available: values.len(),
        });
    }
    let h = build_hankel(values, HankelSpec::new(0, 1, nu_max))?;
    let sv = linalg::singular_values(h)?;
    let s1 = sv.first().copied().unwrap_or_else(T::zero);
    if s1 == T::zero() {
        return Ok(0);
    }
    Ok(sv.iter().filter(|s| **s > rel_tol * s1).count())
}
