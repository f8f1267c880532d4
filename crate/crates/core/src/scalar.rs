//! Scalar abstraction shared by every numerical kernel in the crate.
//!
//! All algorithms are written against [`Real`], which is satisfied by `f32`
//! and `f64`. Complex arithmetic uses [`num_complex::Complex`]; the small set
//! of transcendental helpers below avoids the method-name overlap between
//! `num_traits::Float` and nalgebra's `RealField`.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, ToPrimitive};

/// Real floating point type usable by the analysis.
pub trait Real: RealField + Copy + FloatConst + ToPrimitive {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Conversion from a count or index.
    #[inline]
    fn of_usize(n: usize) -> Self {
        nalgebra::convert(n as f64)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Modulus `|z|`.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Principal argument in `(-pi, pi]`.
#[inline]
pub fn carg<T: Real>(z: Complex<T>) -> T {
    z.im.atan2(z.re)
}

#[inline]
pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    let r = z.re.exp();
    Complex::new(r * z.im.cos(), r * z.im.sin())
}

/// Principal branch of the complex logarithm.
#[inline]
pub fn cln<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(cabs(z).ln(), carg(z))
}

#[inline]
pub fn polar<T: Real>(r: T, theta: T) -> Complex<T> {
    Complex::new(r * theta.cos(), r * theta.sin())
}

/// Integer power, including negative exponents.
#[inline]
pub fn cpowi<T: Real>(z: Complex<T>, exp: i64) -> Complex<T> {
    let mut base = if exp < 0 { Complex::new(T::one(), T::zero()) / z } else { z };
    let mut e = exp.unsigned_abs();
    let mut acc = Complex::new(T::one(), T::zero());
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base = base * base;
        e >>= 1;
    }
    acc
}

/// All `k`-th roots of `z`, the first one on the principal branch.
pub fn croots<T: Real>(z: Complex<T>, k: usize) -> Vec<Complex<T>> {
    let kk = T::of_usize(k);
    let r = cabs(z).powf(T::one() / kk);
    let theta = carg(z);
    (0..k)
        .map(|l| polar(r, (theta + T::two_pi() * T::of_usize(l)) / kk))
        .collect()
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut g = x % two_pi;
    if g > T::PI() {
        g -= two_pi;
    }
    if g <= -T::PI() {
        g += two_pi;
    }
    g
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
