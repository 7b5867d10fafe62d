//! Analytical reference quantities.
//!
//! The one-point law of the centre-of-mass process is a Gaussian scale
//! mixture: conditionally on Λ (and the drawn relaxation times) it is a
//! centred Gaussian whose variance involves v(t) = E_q[τ(1 - e^{-2t/τ})],
//! the variance of the σ-rescaled single particle. This module evaluates
//! v(t), the ensemble covariance quadrature, the mixture density for an
//! arbitrary Λ population, and the special case with M-Wright mixing where
//! the density has the closed form P(z; t) = M_{β/2}(|z|/t^H) / (2 t^H).

mod mwright;

pub use mwright::{mwright, DomainError};

use crate::populations::PopulationSpec;
use crate::quad::QuadError;

/// Evaluation errors for kernel/expectation computations.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    Domain(String),
    Quadrature(QuadError),
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::Domain(m) => write!(f, "domain error: {m}"),
            EvalError::Quadrature(e) => write!(f, "quadrature error: {e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<QuadError> for EvalError {
    fn from(e: QuadError) -> Self {
        EvalError::Quadrature(e)
    }
}

impl From<DomainError> for EvalError {
    fn from(e: DomainError) -> Self {
        EvalError::Domain(e.0)
    }
}

/// Parameters of the self-similar kernel: variance scale t^{2H} and
/// M-Wright mixing order β.
///
/// β = 1 is admitted as the degenerate (purely Gaussian) mixing limit; the
/// kernel then involves M_{1/2} and reduces to a Gaussian density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub h: f64,
    pub beta: f64,
    pub t: f64,
}

impl KernelParams {
    pub fn new(h: f64, beta: f64, t: f64) -> Result<Self, EvalError> {
        if !(h.is_finite() && h > 0.0 && h < 1.0) {
            return Err(EvalError::Domain(format!("H must lie in (0,1), got {h}")));
        }
        if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
            return Err(EvalError::Domain(format!(
                "beta must lie in (0,1], got {beta}"
            )));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(EvalError::Domain(format!("t must be positive, got {t}")));
        }
        Ok(Self { h, beta, t })
    }
}

/// One-point density of the M-Wright-mixed self-similar process:
/// P(z; t) = M_{β/2}(|z|/t^H) / (2 t^H). Symmetric in z.
pub fn ggbm_density(z: f64, params: &KernelParams) -> Result<f64, EvalError> {
    let th = params.t.powf(params.h);
    Ok(mwright(params.beta / 2.0, z.abs() / th)? / (2.0 * th))
}

/// Variance of the σ-rescaled single-particle process at time t:
/// v(t) = E_q[τ (1 - e^{-2t/τ})]. Closed form for a degenerate population,
/// adaptive quadrature otherwise. Bounded by min(2t, E_q[τ]).
pub fn variance_y(t: f64, q: &PopulationSpec) -> Result<f64, EvalError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(EvalError::Domain(format!("t must be positive, got {t}")));
    }
    Ok(q.expectation(|tau| -tau * (-2.0 * t / tau).exp_m1())?)
}

/// Covariance of the centre-of-mass process:
/// E[Z_t Z_s] = N E[Λ] ∫ τ (e^{-|t-s|/τ} - e^{-(t+s)/τ}) q(τ) dτ.
pub fn covariance_z(
    t: f64,
    s: f64,
    q: &PopulationSpec,
    n: usize,
    mean_lambda: f64,
) -> Result<f64, EvalError> {
    if !(t > 0.0 && s > 0.0) {
        return Err(EvalError::Domain(format!(
            "times must be positive, got ({t}, {s})"
        )));
    }
    let d_near = (t - s).abs();
    let d_far = t + s;
    let integral = q.expectation(|tau| {
        // e^{-a/τ} - e^{-b/τ} = -e^{-a/τ} expm1(-(b-a)/τ), accurate as s→0.
        -tau * (-d_near / tau).exp() * ((d_near - d_far) / tau).exp_m1()
    })?;
    Ok(n as f64 * mean_lambda * integral)
}

/// One-point mixture density with a general mixing population f for the
/// squared scale: ∫ (4πλ v_t)^{-1/2} exp(-z²/(4 λ v_t)) f(λ) dλ.
pub fn mixture_density(z: f64, vt: f64, f: &PopulationSpec) -> Result<f64, EvalError> {
    if !(vt.is_finite() && vt > 0.0) {
        return Err(EvalError::Domain(format!(
            "variance factor must be positive, got {vt}"
        )));
    }
    let z2 = z * z;
    Ok(f.expectation(|lambda| {
        let s2 = 4.0 * lambda * vt;
        (std::f64::consts::PI * s2).sqrt().recip() * (-z2 / s2).exp()
    })?)
}

/// Tabulates the inverse CDF of the M-Wright density M_β on [0, ∞) as
/// monotone (probability, quantile) pairs, suitable for
/// [`PopulationSpec::tabulated`]. The grid covers the support up to the
/// point where the remaining tail mass is below ~1e-13.
pub fn mwright_quantile_grid(beta: f64, nodes: usize) -> Result<Vec<(f64, f64)>, EvalError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(EvalError::Domain(format!(
            "M-Wright order must lie in (0,1) for tabulation, got {beta}"
        )));
    }
    if nodes < 16 {
        return Err(EvalError::Domain("need at least 16 nodes".into()));
    }
    // Tail mass beyond z is ~ M_β(z)·z^{1-β-ish}; pushing the decay
    // exponent to 34 leaves < 1e-13.
    let b = (1.0 - beta) * beta.powf(beta / (1.0 - beta));
    let z_max = (34.0 / b).powf(1.0 - beta);
    let grid: Vec<f64> = (0..nodes)
        .map(|i| {
            let u = i as f64 / (nodes - 1) as f64;
            // Mildly densified near zero where the density varies fastest.
            z_max * u * u * (3.0 - 2.0 * u) // smoothstep keeps monotone
        })
        .collect();
    let table = crate::populations::table::QuantileTable::from_density(&grid, |z| {
        mwright(beta, z).unwrap_or(0.0)
    })
    .map_err(EvalError::Domain)?;
    let mut pairs = table.pairs();
    // The population support is the positive axis; clamp the zero quantile
    // to a representable positive origin.
    if let Some(first) = pairs.first_mut() {
        if first.1 <= 0.0 {
            first.1 = 1e-300;
        }
    }
    Ok(pairs)
}
