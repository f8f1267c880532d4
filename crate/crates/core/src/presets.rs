//! Reference models used by the experiments and tests.

use crate::scalar::Real;
use crate::signal::{ExponentialTerm, SignalModel};

fn build<T: Real>(rows: &[(f64, f64, f64, f64)]) -> SignalModel<T> {
    let terms = rows
        .iter()
        .map(|&(beta, gamma, psi, f)| {
            ExponentialTerm::new(
                T::of(beta),
                T::of(gamma),
                T::of(psi),
                T::of(2.0 * std::f64::consts::PI * f),
            )
            .expect("preset terms are valid")
        })
        .collect();
    SignalModel::new(terms).expect("preset model is valid")
}

/// Three-term model of the outlier experiment; rows are
/// `(beta, gamma, psi, omega / 2pi)`.
pub fn outlier_table<T: Real>() -> SignalModel<T> {
    build(&[
        (1.0, 0.3342, -0.1, 417.764),
        (1.0, 0.8084, 0.0, -15.8),
        (0.5, 0.5880, 0.0, -19.5),
    ])
}

/// Twelve undamped terms of the high-noise experiment.
pub fn high_noise_table<T: Real>() -> SignalModel<T> {
    use std::f64::consts::PI;
    build(&[
        (1.0, 0.0, 0.0, -5.93),
        (2.0, PI, 0.0, -4.05),
        (2.0, PI / 4.0, 0.0, -3.10),
        (2.0, PI / 8.0, 0.0, -1.82),
        (2.0, 3.0 * PI / 4.0, 0.0, -1.31),
        (1.0, PI / 10.0, 0.0, 1.90),
        (3.0, -PI, 0.0, 2.97),
        (1.5, -7.0 * PI / 8.0, 0.0, 6.05),
        (2.0, 0.0, 0.0, 6.67),
        (3.0, -78.0 * PI / 100.0, 0.0, 38.0),
        (1.0, 0.0, 0.0, 43.0),
        (1.0, PI / 5.0, 0.0, -24.0),
    ])
}

/// Ten unit-amplitude tones at `0, 1, ..., 9` cycles per unit time.
pub fn toy<T: Real>() -> SignalModel<T> {
    let rows: Vec<_> = (0..10).map(|i| (1.0, 0.0, 0.0, i as f64)).collect();
    build(&rows)
}

/// Two tones at 13 and 33 cycles per unit time that alias onto each other
/// when a rate of 100 is decimated by 10.
pub fn collision<T: Real>() -> SignalModel<T> {
    build(&[(1.0, 0.0, 0.0, 13.0), (1.0, 0.0, 0.0, 33.0)])
}

/// Sampling rates the experiments use for the models above.
pub const OUTLIER_RATE: f64 = 1000.0;
pub const HIGH_NOISE_RATE: f64 = 100.0;
pub const TOY_RATE: f64 = 100.0;
pub const COLLISION_RATE: f64 = 100.0;
