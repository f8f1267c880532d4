//! Multi-exponential signal model: synthesis, uniform sampling and
//! perturbation with circular Gaussian noise or isolated outliers.
//!
//! A term is parameterised by amplitude `beta`, phase `gamma`, damping `psi`
//! and angular frequency `omega`, so that it contributes
//! `beta * exp(i gamma) * exp((psi + i omega) t)` to the signal.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VexpaError};
use crate::scalar::{cabs, carg, cexp, polar, wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialTerm<T> {
    pub beta: T,
    pub gamma: T,
    pub psi: T,
    pub omega: T,
}

impl<T: Real> ExponentialTerm<T> {
    /// Validated constructor; the phase is wrapped into `(-pi, pi]`.
    pub fn new(beta: T, gamma: T, psi: T, omega: T) -> Result<Self> {
        let term = Self {
            beta,
            gamma: wrap_angle(gamma),
            psi,
            omega,
        };
        term.validate()?;
        Ok(term)
    }

    /// Builds a term from the complex coefficient `alpha` and exponent `mu`.
    ///
    /// No validation: estimator output may carry a vanishing amplitude.
    pub fn from_complex(alpha: Complex<T>, mu: Complex<T>) -> Self {
        Self {
            beta: cabs(alpha),
            gamma: carg(alpha),
            psi: mu.re,
            omega: mu.im,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.beta.is_finite()
            && self.gamma.is_finite()
            && self.psi.is_finite()
            && self.omega.is_finite();
        if !finite {
            return Err(VexpaError::InvalidModel("non-finite term parameter".into()));
        }
        if self.beta <= T::zero() {
            return Err(VexpaError::InvalidModel(format!(
                "amplitude must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn alpha(&self) -> Complex<T> {
        polar(self.beta, self.gamma)
    }

    #[inline]
    pub fn mu(&self) -> Complex<T> {
        Complex::new(self.psi, self.omega)
    }

    /// `omega / (2 pi)`.
    #[inline]
    pub fn frequency(&self) -> T {
        self.omega / T::two_pi()
    }

    /// Generalized eigenvalue `exp(mu * delta)` at sampling interval `delta`.
    #[inline]
    pub fn node(&self, delta: T) -> Complex<T> {
        cexp(self.mu() * delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel<T> {
    pub terms: Vec<ExponentialTerm<T>>,
}

impl<T: Real> SignalModel<T> {
    pub fn new(terms: Vec<ExponentialTerm<T>>) -> Result<Self> {
        let model = Self { terms };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(VexpaError::InvalidModel("model needs at least one term".into()));
        }
        for term in &self.terms {
            term.validate()?;
        }
        for (a, ta) in self.terms.iter().enumerate() {
            for (b, tb) in self.terms.iter().enumerate().skip(a + 1) {
                if ta.mu() == tb.mu() {
                    return Err(VexpaError::InvalidModel(format!(
                        "terms {a} and {b} share the exponent {}",
                        ta.mu()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Model order `n`.
    #[inline]
    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn alphas(&self) -> Vec<Complex<T>> {
        self.terms.iter().map(|t| t.alpha()).collect()
    }

    pub fn nodes(&self, delta: T) -> Vec<Complex<T>> {
        self.terms.iter().map(|t| t.node(delta)).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let mut model: Self = serde_json::from_str(s)?;
        for term in &mut model.terms {
            term.gamma = wrap_angle(term.gamma);
        }
        model.validate()?;
        Ok(model)
    }
}

/// Sum of complex exponentials at time `t`.
pub fn evaluate<T: Real>(model: &SignalModel<T>, t: T) -> Complex<T> {
    model
        .terms
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, term| {
            acc + term.alpha() * cexp(term.mu() * t)
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid<T> {
    pub delta: T,
    pub count: usize,
}

impl<T: Real> SamplingGrid<T> {
    pub fn new(delta: T, count: usize) -> Result<Self> {
        let grid = Self { delta, count };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with sampling rate `omega_rate = 1 / delta`.
    pub fn from_rate(omega_rate: T, count: usize) -> Result<Self> {
        Self::new(T::one() / omega_rate, count)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > T::zero()) {
            return Err(VexpaError::InvalidGrid(format!(
                "sampling interval must be positive, got {}",
                self.delta
            )));
        }
        if self.count < 2 {
            return Err(VexpaError::InvalidGrid(format!(
                "need at least 2 samples, got {}",
                self.count
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn omega_rate(&self) -> T {
        T::one() / self.delta
    }

    #[inline]
    pub fn time(&self, j: usize) -> T {
        T::of_usize(j) * self.delta
    }
}

/// One perturbation applied to a sample set, in call order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation<T> {
    Noise { snr_db: f64, seed: u64 },
    Outlier { index: usize, offset: Complex<T> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet<T> {
    pub grid: SamplingGrid<T>,
    pub values: Vec<Complex<T>>,
    pub perturbations: Vec<Perturbation<T>>,
}

impl<T: Real> SampleSet<T> {
    pub fn new(grid: SamplingGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.count {
            return Err(VexpaError::InvalidGrid(format!(
                "grid expects {} samples, got {}",
                grid.count,
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            perturbations: Vec::new(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// SNR of the most recent noise perturbation, if any.
    pub fn noise_snr_db(&self) -> Option<f64> {
        self.perturbations.iter().rev().find_map(|p| match p {
            Perturbation::Noise { snr_db, .. } => Some(*snr_db),
            _ => None,
        })
    }

    pub fn outliers(&self) -> Vec<(usize, Complex<T>)> {
        self.perturbations
            .iter()
            .filter_map(|p| match p {
                Perturbation::Outlier { index, offset } => Some((*index, *offset)),
                _ => None,
            })
            .collect()
    }

    /// Mean of `|values[j]|^2`.
    pub fn power(&self) -> T {
        let sum = self
            .values
            .iter()
            .fold(T::zero(), |acc, v| acc + v.norm_sqr());
        sum / T::of_usize(self.values.len())
    }
}

pub fn sample<T: Real>(model: &SignalModel<T>, grid: &SamplingGrid<T>) -> SampleSet<T> {
    let values = (0..grid.count)
        .map(|j| evaluate(model, grid.time(j)))
        .collect();
    SampleSet {
        grid: *grid,
        values,
        perturbations: Vec::new(),
    }
}

/// Adds white circular Gaussian noise at the requested SNR.
///
/// `snr_db = +inf` leaves the values untouched. The noise variance is
/// `mean|phi_j|^2 / 10^(snr_db / 10)`, split equally between the real and
/// imaginary parts. The generator is ChaCha8 seeded from `seed`.
pub fn add_noise<T: Real>(samples: &SampleSet<T>, snr_db: f64, seed: u64) -> Result<SampleSet<T>> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(VexpaError::NonFinite("snr_db"));
    }
    let mut out = samples.clone();
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let power = samples.power().to_f64_lossy();
    let sigma2 = power / 10f64.powf(snr_db / 10.0);
    let scale = (sigma2 / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut out.values {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex::new(T::of(scale * re), T::of(scale * im));
    }
    out.perturbations.push(Perturbation::Noise { snr_db, seed });
    Ok(out)
}

pub fn inject_outlier<T: Real>(
    samples: &SampleSet<T>,
    index: usize,
    offset: Complex<T>,
) -> Result<SampleSet<T>> {
    if index >= samples.len() {
        return Err(VexpaError::IndexOutOfRange {
            index,
            len: samples.len(),
        });
    }
    let mut out = samples.clone();
    out.values[index] += offset;
    out.perturbations.push(Perturbation::Outlier { index, offset });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn term(beta: f64, gamma: f64, psi: f64, omega: f64) -> ExponentialTerm<f64> {
        ExponentialTerm::new(beta, gamma, psi, omega).unwrap()
    }

    #[test]
    fn constant_term_evaluates_to_one() {
        let m = SignalModel::new(vec![term(1.0, 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(evaluate(&m, 5.0), Complex::new(1.0, 0.0));
    }

    #[test]
    fn two_tones_at_origin_sum_amplitudes() {
        let m = SignalModel::new(vec![
            term(1.0, 0.0, 0.0, 2.0 * PI * 13.0),
            term(1.0, 0.0, 0.0, 2.0 * PI * 33.0),
        ])
        .unwrap();
        assert_eq!(evaluate(&m, 0.0), Complex::new(2.0, 0.0));
    }

    #[test]
    fn quarter_cycle_rotation() {
        let m = SignalModel::new(vec![term(1.0, 0.0, 0.0, 2.0 * PI * 0.25)]).unwrap();
        let s = sample(&m, &SamplingGrid::new(1.0, 4).unwrap());
        let expected = [
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 1.0),
            Complex::new(-1.0, 0.0),
            Complex::new(0.0, -1.0),
        ];
        for (v, e) in s.values.iter().zip(expected) {
            assert!(cabs(v - e) < 1e-15);
        }
        let c = sample(
            &SignalModel::new(vec![term(1.0, 0.0, 0.0, 0.0)]).unwrap(),
            &SamplingGrid::new(1.0, 3).unwrap(),
        );
        assert_eq!(c.values, vec![Complex::new(1.0, 0.0); 3]);
    }

    #[test]
    fn invalid_models_and_grids_rejected() {
        assert!(SignalModel::<f64>::new(vec![]).is_err());
        assert!(ExponentialTerm::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(SignalModel::new(vec![term(1.0, 0.0, 0.0, 1.0), term(2.0, 0.1, 0.0, 1.0)]).is_err());
        assert!(SamplingGrid::new(0.0, 10).is_err());
        assert!(SamplingGrid::new(1.0, 1).is_err());
        assert!(SamplingGrid::new(-1.0, 10).is_err());
    }

    #[test]
    fn alpha_mu_round_trip() {
        let t = term(0.7, -2.5, -0.3, 11.0);
        let back = ExponentialTerm::from_complex(t.alpha(), t.mu());
        assert!((back.beta - t.beta).abs() < 1e-15);
        assert!((back.gamma - t.gamma).abs() < 1e-15);
        assert_eq!(back.psi, t.psi);
        assert_eq!(back.omega, t.omega);
    }

    #[test]
    fn infinite_snr_is_identity_and_nan_rejected() {
        let m = SignalModel::new(vec![term(1.0, 0.2, 0.0, 3.0)]).unwrap();
        let s = sample(&m, &SamplingGrid::new(0.1, 20).unwrap());
        let same = add_noise(&s, f64::INFINITY, 7).unwrap();
        assert_eq!(same.values, s.values);
        assert!(add_noise(&s, f64::NAN, 7).is_err());
        assert!(add_noise(&s, f64::NEG_INFINITY, 7).is_err());
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let m = SignalModel::new(vec![term(1.0, 0.2, 0.0, 3.0)]).unwrap();
        let s = sample(&m, &SamplingGrid::new(0.1, 50).unwrap());
        let a = add_noise(&s, 30.0, 1).unwrap();
        let b = add_noise(&s, 30.0, 1).unwrap();
        let c = add_noise(&s, 30.0, 2).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        assert_eq!(a.noise_snr_db(), Some(30.0));
    }

    #[test]
    fn outlier_injection() {
        let m = SignalModel::new(vec![term(1.0, 0.0, 0.0, 0.0)]).unwrap();
        let s = sample(&m, &SamplingGrid::new(1.0, 30).unwrap());
        let o = inject_outlier(&s, 23, Complex::new(20.0, 0.0)).unwrap();
        assert_eq!(o.values[23] - s.values[23], Complex::new(20.0, 0.0));
        assert_eq!(o.outliers(), vec![(23, Complex::new(20.0, 0.0))]);
        let z = inject_outlier(&s, 0, Complex::new(0.0, 0.0)).unwrap();
        assert_eq!(z.values, s.values);
        assert_eq!(z.outliers().len(), 1);
        let short = sample(&m, &SamplingGrid::new(1.0, 10).unwrap());
        assert!(matches!(
            inject_outlier(&short, 10, Complex::new(1.0, 0.0)),
            Err(VexpaError::IndexOutOfRange { index: 10, len: 10 })
        ));
    }
}
