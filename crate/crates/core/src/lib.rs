//! Heterogeneous Ornstein-Uhlenbeck ensembles.
//!
//! An ensemble of OU particles whose relaxation times and noise amplitudes
//! are drawn from population densities q(τ) and g(σ) produces a
//! centre-of-mass process Z_t = Σ (m^κ/M) X^κ_t that is equivalent in
//! distribution to two other constructions: a non-autonomous SDE with a
//! time-dependent relaxation scale (Z*) and a randomly-scaled Gaussian
//! process √(NΛ) B_t^H (Z^H). This crate simulates all three, evaluates the
//! analytic reference quantities (M-Wright function, ggBm kernels, the
//! ensemble covariance quadrature), and provides the estimators and
//! experiment harness used to verify the equivalences and the anomalous
//! variance scaling induced by heavy-tailed relaxation-time populations.
//!
//! Module map:
//! - [`populations`]: parameter population specs, sampling, densities.
//! - [`specfun`]: M-Wright function, ggBm/mixture kernels, variance and
//!   covariance quadratures.
//! - [`engine`]: trajectory simulation of Z, Z*, Z^H and the effective
//!   relaxation time.
//! - [`stats`]: KS tests, autocovariance, scaling fits, histograms.
//! - [`harness`]: end-to-end equivalence / correlation / CLT studies.
//! - [`export`]: CSV and binary trajectory formats, report files.

pub mod engine;
pub mod export;
pub mod harness;
pub mod populations;
pub mod quad;
pub mod rng;
pub mod specfun;
pub mod stats;

pub use engine::{EnsembleParams, LambdaMode, ProcessId, TrajectoryBatch, ZhMode};
pub use populations::{ParticleParams, PopulationSpec};
pub use specfun::KernelParams;
pub use stats::{DensityEstimate, KsResult};
