//! Validated exponential analysis.
//!
//! A uniformly sampled sum of complex exponentials is split into `u`
//! decimations that alias every frequency on purpose. Each decimation is
//! analysed with a Prony-type method, the aliasing is undone with a second,
//! coprime sample shift `s`, and only eigenvalues that cluster across
//! decimations are reported. The number of clusters is the model order.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod cluster;
pub mod decimation;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod presets;
pub mod prony;
pub mod scalar;
pub mod signal;

pub use error::{Result, VexpaError};
pub use pipeline::{run_baseline, run_vexpa, BaseMethod, VexpaConfig};

pub type ExponentialTerm = signal::ExponentialTerm<f64>;
pub type SignalModel = signal::SignalModel<f64>;
pub type SamplingGrid = signal::SamplingGrid<f64>;
pub type SampleSet = signal::SampleSet<f64>;
pub type VexpaResult = pipeline::VexpaResult<f64>;
pub type CrlbReport = diagnostics::CrlbReport<f64>;

pub type ExponentialTerm32 = signal::ExponentialTerm<f32>;
pub type SignalModel32 = signal::SignalModel<f32>;
pub type SamplingGrid32 = signal::SamplingGrid<f32>;
pub type SampleSet32 = signal::SampleSet<f32>;
pub type VexpaResult32 = pipeline::VexpaResult<f32>;
pub type CrlbReport32 = diagnostics::CrlbReport<f32>;
