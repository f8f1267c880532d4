//! Sensitivity diagnostics: the first-order disposedness bound of each
//! generalized eigenvalue and Cramér-Rao lower bounds for the real model
//! parameters under white circular Gaussian noise.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VexpaError};
use crate::linalg::{self, CMatrix};
use crate::prony::{build_hankel, HankelSpec};
use crate::scalar::{cabs, cexp, Real};
use crate::signal::{sample, SamplingGrid, SignalModel};

/// Monomial coefficients (constant term first) of the Lagrange basis
/// polynomial that is one at `nodes[i]` and vanishes at the other nodes,
/// zero-padded to length `n + 1`. `i` is zero-based.
pub fn lagrange_coefficients<T: Real>(nodes: &[Complex<T>], i: usize) -> Result<Vec<Complex<T>>> {
    let n = nodes.len();
    if i >= n {
        return Err(VexpaError::IndexOutOfRange { index: i, len: n });
    }
    for a in 0..n {
        for b in a + 1..n {
            if cabs(nodes[a] - nodes[b]) == T::zero() {
                return Err(VexpaError::CoincidentNodes(a, b));
            }
        }
    }
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    let mut coeffs = vec![zero; n + 1];
    coeffs[0] = one;
    let mut denom = one;
    let mut degree = 0;
    for (j, &z) in nodes.iter().enumerate() {
        if j == i {
            continue;
        }
        let gap = nodes[i] - z;
        if cabs(gap) == T::zero() {
            return Err(VexpaError::CoincidentNodes(i.min(j), i.max(j)));
        }
        denom *= gap;
        // multiply by (x - z)
        for k in (0..=degree).rev() {
            let c = coeffs[k];
            coeffs[k + 1] += c;
            coeffs[k] = -c * z;
        }
        degree += 1;
    }
    for c in &mut coeffs {
        *c /= denom;
    }
    Ok(coeffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisposednessEntry<T> {
    pub lambda: Complex<T>,
    pub bound: T,
    pub lagrange_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisposednessReport<T> {
    pub u: usize,
    pub entries: Vec<DisposednessEntry<T>>,
    /// `(||H(s = u)||_2, ||H(s = 0)||_2)` of the stride-`u` Hankel pencil.
    pub hankel_norms: (T, T),
}

impl<T: Real> DisposednessReport<T> {
    pub fn max_bound(&self) -> T {
        self.entries.iter().map(|e| e.bound).fold(T::zero(), |a, b| a.max(b))
    }

    pub fn min_bound(&self) -> T {
        self.entries
            .iter()
            .map(|e| e.bound)
            .fold(T::max_value().unwrap_or_else(T::one), |a, b| a.min(b))
    }
}

/// Upper bound on `|d lambda_i / d eps|` for the pencil of stride `u`:
/// `(|z_i| + 1) / |alpha_i| * ||l_i||^2 * (||H(u, u)|| + ||H(0, u)||)` with
/// nodes `z_i = exp(mu_i u delta)` and noisefree Hankel matrices.
pub fn disposedness<T: Real>(model: &SignalModel<T>, delta: T, u: usize) -> Result<DisposednessReport<T>> {
    if u == 0 {
        return Err(VexpaError::InvalidConfig("undersampling must be positive".into()));
    }
    let n = model.order();
    let step = delta * T::of_usize(u);
    let nodes = model.nodes(step);
    let tol = T::default_epsilon() * T::of(100.0);
    for a in 0..n {
        for b in a + 1..n {
            if cabs(nodes[a] - nodes[b]) <= tol * (T::one() + cabs(nodes[a])) {
                return Err(VexpaError::Collision(a, b));
            }
        }
    }
    let samples = sample(model, &SamplingGrid::new(step, 2 * n)?);
    let h0 = build_hankel(&samples.values, HankelSpec::new(0, 1, n))?;
    let h1 = build_hankel(&samples.values, HankelSpec::new(1, 1, n))?;
    let n0 = linalg::norm2(&h0)?;
    let n1 = linalg::norm2(&h1)?;
    let entries = model
        .terms
        .iter()
        .zip(&nodes)
        .enumerate()
        .map(|(i, (term, &z))| {
            let ell = lagrange_coefficients(&nodes, i)?;
            let norm_sq = ell.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr());
            let bound = (cabs(z) + T::one()) / term.beta * norm_sq * (n1 + n0);
            Ok(DisposednessEntry {
                lambda: z,
                bound,
                lagrange_norm: norm_sq.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DisposednessReport {
        u,
        entries,
        hankel_norms: (n1, n0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermVariances<T> {
    pub beta: T,
    pub gamma: T,
    pub psi: T,
    pub omega: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbReport<T> {
    pub variances: Vec<TermVariances<T>>,
    /// Root mean square of the vector of omega variances.
    pub rms_omega: T,
    pub count: usize,
    pub delta: T,
    pub sigma2: T,
    /// Reciprocal condition of the Jacobi-scaled Fisher matrix.
    pub rcond: T,
    pub pseudo_inverse: bool,
}

impl<T: Real> CrlbReport<T> {
    /// `sqrt(mean_i var(omega_i))`: the RMS frequency error an efficient
    /// estimator would attain.
    pub fn omega_rms_std(&self) -> T {
        let n = T::of_usize(self.variances.len());
        (self.variances.iter().fold(T::zero(), |a, v| a + v.omega) / n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrlbOptions {
    /// Invert a singular Fisher matrix with a pseudo-inverse instead of failing.
    pub allow_pseudo_inverse: bool,
}

/// Jacobian of the stacked samples with respect to `(beta, gamma, psi, omega)`
/// of every term, one column per real parameter.
pub fn jacobian<T: Real>(model: &SignalModel<T>, grid: &SamplingGrid<T>) -> CMatrix<T> {
    let n = model.order();
    let i_unit = Complex::new(T::zero(), T::one());
    let mut jac = CMatrix::<T>::zeros(grid.count, 4 * n);
    for (k, term) in model.terms.iter().enumerate() {
        let unit_phase = term.alpha().unscale(term.beta);
        for j in 0..grid.count {
            let t = grid.time(j);
            let e = cexp(term.mu() * t);
            let x = term.alpha() * e;
            jac[(j, 4 * k)] = unit_phase * e;
            jac[(j, 4 * k + 1)] = i_unit * x;
            jac[(j, 4 * k + 2)] = x.scale(t);
            jac[(j, 4 * k + 3)] = (i_unit * x).scale(t);
        }
    }
    jac
}

/// Fisher information `(2 / sigma2) Re(J^H J)`.
pub fn fisher_information<T: Real>(model: &SignalModel<T>, grid: &SamplingGrid<T>, sigma2: T) -> DMatrix<T> {
    let jac = jacobian(model, grid);
    let gram = jac.adjoint() * &jac;
    let two_over = T::of(2.0) / sigma2;
    gram.map(|z| z.re * two_over)
}

pub fn crlb<T: Real>(model: &SignalModel<T>, grid: &SamplingGrid<T>, sigma2: T) -> Result<CrlbReport<T>> {
    crlb_with(model, grid, sigma2, CrlbOptions::default())
}

pub fn crlb_with<T: Real>(
    model: &SignalModel<T>,
    grid: &SamplingGrid<T>,
    sigma2: T,
    options: CrlbOptions,
) -> Result<CrlbReport<T>> {
    if !(sigma2.is_finite() && sigma2 > T::zero()) {
        return Err(VexpaError::NonFinite("sigma2"));
    }
    grid.validate()?;
    let fisher = fisher_information(model, grid, sigma2);
    let dim = fisher.nrows();
    let d: Vec<T> = (0..dim).map(|i| fisher[(i, i)].sqrt()).collect();
    if d.iter().any(|x| !(*x > T::zero())) {
        return Err(VexpaError::NotIdentifiable { rcond: 0.0 });
    }
    let scaled = DMatrix::from_fn(dim, dim, |i, j| fisher[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(scaled.clone());
    let emax = eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let emin = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap_or(emax), |a, b| a.min(b));
    let rcond = if emax > T::zero() { emin / emax } else { T::zero() };
    let singular = !(rcond > T::default_epsilon() * T::of_usize(dim * 10));

    let (inv_scaled, pseudo) = match (singular, scaled.clone().cholesky()) {
        (false, Some(chol)) => (chol.inverse(), false),
        _ if options.allow_pseudo_inverse => {
            let cutoff = emax * T::default_epsilon() * T::of_usize(dim * 10);
            let inv_vals = eig.eigenvalues.map(|v| if v > cutoff { T::one() / v } else { T::zero() });
            let q = &eig.eigenvectors;
            (q * DMatrix::from_diagonal(&inv_vals) * q.transpose(), true)
        }
        _ => {
            return Err(VexpaError::NotIdentifiable {
                rcond: rcond.to_f64_lossy(),
            })
        }
    };
    let var = |i: usize| inv_scaled[(i, i)] / (d[i] * d[i]);
    let variances: Vec<_> = (0..model.order())
        .map(|k| TermVariances {
            beta: var(4 * k),
            gamma: var(4 * k + 1),
            psi: var(4 * k + 2),
            omega: var(4 * k + 3),
        })
        .collect();
    let n = T::of_usize(variances.len());
    let rms_omega = (variances.iter().fold(T::zero(), |a, v| a + v.omega * v.omega) / n).sqrt();
    Ok(CrlbReport {
        variances,
        rms_omega,
        count: grid.count,
        delta: grid.delta,
        sigma2,
        rcond,
        pseudo_inverse: pseudo,
    })
}

/// Complex noise variance that gives `snr_db` for the noisefree samples of
/// `model` on `grid`.
pub fn noise_variance<T: Real>(model: &SignalModel<T>, grid: &SamplingGrid<T>, snr_db: f64) -> T {
    let power = sample(model, grid).power();
    power / T::of(10f64.powf(snr_db / 10.0))
}
