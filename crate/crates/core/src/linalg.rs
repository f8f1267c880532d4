//! Dense complex linear algebra used by the estimators.
//!
//! Eigenvalues and singular values come from `faer`, evaluated in double
//! precision whatever the scalar type; least squares uses a column-scaled
//! Householder QR.

use faer::{c64, Mat};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Result, VexpaError};
use crate::scalar::{cabs, cpowi, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

fn to_dense<T: Real>(m: &CMatrix<T>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        c64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
    })
}

fn from_c64<T: Real>(z: c64) -> Complex<T> {
    Complex::new(T::of(z.re), T::of(z.im))
}

/// Eigenvalues of a square complex matrix.
pub fn eigenvalues<T: Real>(m: CMatrix<T>) -> Result<Vec<Complex<T>>> {
    if m.nrows() != m.ncols() {
        return Err(VexpaError::InvalidConfig("eigenvalues of a non-square matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(VexpaError::NonFinite("eigenvalue input"));
    }
    let ev = to_dense(&m).eigenvalues().map_err(|_| VexpaError::NoConvergence)?;
    Ok(ev.into_iter().map(from_c64).collect())
}

/// Thin singular value decomposition, singular values decreasing.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    /// Left singular vectors, one column per singular value.
    pub u: CMatrix<T>,
    pub singular_values: Vec<T>,
}

pub fn svd<T: Real>(m: &CMatrix<T>) -> Result<Svd<T>> {
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(VexpaError::NonFinite("SVD input"));
    }
    let dec = to_dense(m).thin_svd().map_err(|_| VexpaError::NoConvergence)?;
    let (u, s) = (dec.U(), dec.S().column_vector());
    Ok(Svd {
        u: CMatrix::from_fn(u.nrows(), u.ncols(), |i, j| from_c64(u[(i, j)])),
        singular_values: (0..s.nrows()).map(|i| T::of(s[i].re)).collect(),
    })
}

pub fn singular_values<T: Real>(m: CMatrix<T>) -> Result<Vec<T>> {
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(VexpaError::NonFinite("SVD input"));
    }
    let s = to_dense(&m).singular_values().map_err(|_| VexpaError::NoConvergence)?;
    Ok(s.into_iter().map(T::of).collect())
}

/// Spectral norm `||m||_2`.
pub fn norm2<T: Real>(m: &CMatrix<T>) -> Result<T> {
    Ok(singular_values(m.clone())?.first().copied().unwrap_or_else(T::zero))
}

/// Solution of a least-squares problem and a cheap conditioning indicator.
#[derive(Debug, Clone)]
pub struct LstsqSolution<T: Real> {
    pub x: CVector<T>,
    /// `min |R_ii| / max |R_ii|` of the column-scaled triangular factor.
    pub rcond: T,
}

/// Least squares `min ||a x - b||` via QR of the column-normalized matrix.
pub fn lstsq<T: Real>(a: &CMatrix<T>, b: &CVector<T>) -> Result<LstsqSolution<T>> {
    let rhs = CMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let (x, rcond) = lstsq_multi(a, &rhs)?;
    Ok(LstsqSolution {
        x: x.column(0).into_owned(),
        rcond,
    })
}

/// Least squares for every column of `b` at once; returns the solution and
/// the conditioning indicator of [`LstsqSolution`].
pub fn lstsq_multi<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<(CMatrix<T>, T)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(VexpaError::Underdetermined { rows, unknowns: cols });
    }
    let mut scaled = a.clone();
    let mut scales = Vec::with_capacity(cols);
    for mut col in scaled.column_iter_mut() {
        let nrm = col.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        let s = if nrm > T::zero() { nrm } else { T::one() };
        for z in col.iter_mut() {
            *z = z.unscale(s);
        }
        scales.push(s);
    }
    let qr = scaled.qr();
    let r = qr.r();
    let diag: Vec<T> = (0..cols).map(|i| cabs(r[(i, i)])).collect();
    let dmax = diag.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let dmin = diag.iter().copied().fold(T::max_value().unwrap_or(dmax), |a, b| a.min(b));
    let rcond = if dmax > T::zero() { dmin / dmax } else { T::zero() };
    let q = qr.q();
    let qtb = q.adjoint() * b;
    let mut y = r
        .solve_upper_triangular(&qtb)
        .ok_or(VexpaError::RankDeficient { requested: cols, rank: diag.iter().filter(|d| **d > T::zero()).count() })?;
    for (mut row, s) in y.row_iter_mut().zip(&scales) {
        for z in row.iter_mut() {
            *z = z.unscale(*s);
        }
    }
    Ok((y, rcond))
}

/// Vandermonde least squares `b_r = sum_i c_i nodes_i^{powers_r}`.
///
/// Columns of nodes outside the unit disk are evaluated relative to the
/// largest power so nothing overflows; the scaling is undone in the result.
pub fn vandermonde_lstsq<T: Real>(
    nodes: &[Complex<T>],
    powers: &[usize],
    rhs: &[Complex<T>],
) -> Result<LstsqSolution<T>> {
    debug_assert_eq!(powers.len(), rhs.len());
    let rows = powers.len();
    let cols = nodes.len();
    if rows < cols {
        return Err(VexpaError::Underdetermined { rows, unknowns: cols });
    }
    let pmax = powers.iter().copied().max().unwrap_or(0) as i64;
    let mut a = CMatrix::<T>::zeros(rows, cols);
    let mut undo = Vec::with_capacity(cols);
    for (c, &z) in nodes.iter().enumerate() {
        let outside = cabs(z) > T::one();
        for (r, &p) in powers.iter().enumerate() {
            let p = p as i64;
            a[(r, c)] = if outside { cpowi(z, p - pmax) } else { cpowi(z, p) };
        }
        undo.push(if outside { cpowi(z, -pmax) } else { Complex::new(T::one(), T::zero()) });
    }
    let b = CVector::from_column_slice(rhs);
    let mut sol = lstsq(&a, &b)?;
    for (x, u) in sol.x.iter_mut().zip(undo) {
        *x *= u;
    }
    Ok(sol)
}
