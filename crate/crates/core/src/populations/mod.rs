//! Parameter populations of the heterogeneous ensemble.
//!
//! Relaxation times τ^κ and noise amplitudes σ^κ are i.i.d. draws from
//! one-dimensional population densities q(τ) and g(σ). This module defines
//! the supported population families, their (possibly truncated and
//! renormalized) densities, exact or table-based samplers, and expectations
//! E_q[h(τ)] evaluated by adaptive quadrature. It also derives the
//! mass-like per-particle parameters m^κ = √(σ0/σ^κ), γ^κ = m^κ/τ^κ and the
//! aggregate quantities M = Σ m^κ, Λ = σ0/M².

pub mod stable;
pub mod table;

use rand::Rng;
use rand_distr::Distribution;
use statrs::function::gamma::{gamma, gamma_lr};

use crate::quad::{self, QuadError};
use table::QuantileTable;

/// Default truncation window for the inverse-power-exponential family,
/// whose printed form has a non-integrable σ^{-b} tail for b ≤ 1.
pub const IPE_DEFAULT_TRUNCATION: (f64, f64) = (1e-6, 1e6);

const SAMPLER_TABLE_NODES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    InvalidParameter(String),
    NonNormalizable(String),
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpecError::InvalidParameter(m) => write!(f, "invalid population parameter: {m}"),
            SpecError::NonNormalizable(m) => write!(f, "non-normalizable population: {m}"),
        }
    }
}

impl std::error::Error for SpecError {}

/// Error for malformed numeric inputs to derivation helpers.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid input: {}", self.0)
    }
}

impl std::error::Error for InputError {}

/// Population families. All are supported on the positive reals.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationKind {
    /// Point mass at `location`.
    Delta { location: f64 },
    /// rate·e^{-rate·x}.
    Exponential { rate: f64 },
    /// η x^{ν-1} e^{-x^η} / Γ(ν/η).
    GeneralizedGamma { nu: f64, eta: f64 },
    /// Extremal stable density with Laplace transform e^{-s^α}, α ∈ (0,1).
    OneSidedLevyExtremal { alpha: f64 },
    /// a·x^{-b}·e^{-x^{-c}} with mandatory truncation and numerical
    /// renormalization.
    InversePowerExp { a: f64, b: f64, c: f64 },
    /// User-supplied monotone (probability, quantile) grid.
    TabulatedInverseCdf { grid: Vec<(f64, f64)> },
}

/// A validated population: kind, truncation window, normalization constant
/// and (where needed) the numeric inverse-CDF sampler table. Immutable
/// after construction and freely shareable across workers.
#[derive(Debug, Clone)]
pub struct PopulationSpec {
    kind: PopulationKind,
    truncation: Option<(f64, f64)>,
    /// Effective support after truncation.
    support: (f64, f64),
    /// Mass of the raw (untruncated-form) density over `support`.
    norm: f64,
    sampler: Sampler,
}

#[derive(Debug, Clone)]
enum Sampler {
    Constant(f64),
    ExponentialInverse { rate: f64, u_lo: f64, u_span: f64 },
    GammaPower { shape: f64, inv_eta: f64 },
    LevyTransform { alpha: f64 },
    Table(QuantileTable),
}

impl PopulationSpec {
    pub fn delta(location: f64) -> Result<Self, SpecError> {
        Self::new(PopulationKind::Delta { location }, None)
    }

    pub fn exponential(rate: f64) -> Result<Self, SpecError> {
        Self::new(PopulationKind::Exponential { rate }, None)
    }

    pub fn generalized_gamma(nu: f64, eta: f64) -> Result<Self, SpecError> {
        Self::new(PopulationKind::GeneralizedGamma { nu, eta }, None)
    }

    pub fn one_sided_levy(alpha: f64) -> Result<Self, SpecError> {
        Self::new(PopulationKind::OneSidedLevyExtremal { alpha }, None)
    }

    /// Applies [`IPE_DEFAULT_TRUNCATION`]; override with
    /// [`PopulationSpec::with_truncation`].
    pub fn inverse_power_exp(a: f64, b: f64, c: f64) -> Result<Self, SpecError> {
        Self::new(
            PopulationKind::InversePowerExp { a, b, c },
            Some(IPE_DEFAULT_TRUNCATION),
        )
    }

    pub fn tabulated(grid: Vec<(f64, f64)>) -> Result<Self, SpecError> {
        Self::new(PopulationKind::TabulatedInverseCdf { grid }, None)
    }

    /// Rebuilds the spec restricted to [lower, upper] with renormalization.
    pub fn with_truncation(self, lower: f64, upper: f64) -> Result<Self, SpecError> {
        Self::new(self.kind, Some((lower, upper)))
    }

    pub fn kind(&self) -> &PopulationKind {
        &self.kind
    }

    pub fn truncation(&self) -> Option<(f64, f64)> {
        self.truncation
    }

    /// Effective (truncated) support.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn new(kind: PopulationKind, truncation: Option<(f64, f64)>) -> Result<Self, SpecError> {
        let inv = |m: String| SpecError::InvalidParameter(m);
        if let Some((lo, hi)) = truncation {
            if !(lo > 0.0 && lo < hi) {
                return Err(inv(format!(
                    "truncation must satisfy 0 < lower < upper, got ({lo}, {hi})"
                )));
            }
        }

        match &kind {
            PopulationKind::Delta { location } => {
                if !(location.is_finite() && *location > 0.0) {
                    return Err(inv(format!("delta location must be positive, got {location}")));
                }
                if let Some((lo, hi)) = truncation {
                    if *location < lo || *location > hi {
                        return Err(inv("delta location outside truncation window".into()));
                    }
                }
                Ok(Self {
                    support: (*location, *location),
                    norm: 1.0,
                    sampler: Sampler::Constant(*location),
                    kind,
                    truncation,
                })
            }
            PopulationKind::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(inv(format!("exponential rate must be positive, got {rate}")));
                }
                let (lo, hi) = truncation.unwrap_or((0.0, f64::INFINITY));
                let f_lo = if lo > 0.0 { -(-rate * lo).exp_m1() } else { 0.0 };
                let f_hi = if hi.is_finite() { -(-rate * hi).exp_m1() } else { 1.0 };
                let norm = f_hi - f_lo;
                if norm <= 1e-300 {
                    return Err(inv("truncation leaves no exponential mass".into()));
                }
                Ok(Self {
                    support: (lo, hi),
                    norm,
                    sampler: Sampler::ExponentialInverse {
                        rate: *rate,
                        u_lo: f_lo,
                        u_span: norm,
                    },
                    kind,
                    truncation,
                })
            }
            PopulationKind::GeneralizedGamma { nu, eta } => {
                if !(nu.is_finite() && *nu > 0.0 && eta.is_finite() && *eta > 0.0) {
                    return Err(inv(format!(
                        "generalized gamma needs nu, eta > 0, got nu={nu}, eta={eta}"
                    )));
                }
                let shape = nu / eta;
                match truncation {
                    None => Ok(Self {
                        support: (0.0, f64::INFINITY),
                        norm: 1.0,
                        sampler: Sampler::GammaPower {
                            shape,
                            inv_eta: 1.0 / eta,
                        },
                        kind,
                        truncation,
                    }),
                    Some((lo, hi)) => {
                        let cdf = |x: f64| {
                            if x.is_infinite() {
                                1.0
                            } else {
                                gamma_lr(shape, x.powf(*eta))
                            }
                        };
                        let norm = cdf(hi) - cdf(lo);
                        if norm <= 1e-300 {
                            return Err(inv("truncation leaves no generalized-gamma mass".into()));
                        }
                        let kc = kind.clone();
                        let tbl = build_table(&move |x| raw_density_at(&kc, x), lo, hi, cdf)
                            .map_err(SpecError::InvalidParameter)?;
                        Ok(Self {
                            support: (lo, hi),
                            norm,
                            sampler: Sampler::Table(tbl),
                            kind,
                            truncation,
                        })
                    }
                }
            }
            PopulationKind::OneSidedLevyExtremal { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha < 1.0) {
                    return Err(inv(format!("stable index must lie in (0,1), got {alpha}")));
                }
                match truncation {
                    None => Ok(Self {
                        support: (0.0, f64::INFINITY),
                        norm: 1.0,
                        sampler: Sampler::LevyTransform { alpha: *alpha },
                        kind,
                        truncation,
                    }),
                    Some((lo, hi)) => {
                        let a = *alpha;
                        let norm = stable::cdf(a, hi) - stable::cdf(a, lo);
                        if norm <= 1e-300 {
                            return Err(inv("truncation leaves no stable mass".into()));
                        }
                        let kc = kind.clone();
                        let tbl = build_table(&move |x| raw_density_at(&kc, x), lo, hi, |x| {
                            stable::cdf(a, x)
                        })
                        .map_err(SpecError::InvalidParameter)?;
                        Ok(Self {
                            support: (lo, hi),
                            norm,
                            sampler: Sampler::Table(tbl),
                            kind,
                            truncation,
                        })
                    }
                }
            }
            PopulationKind::InversePowerExp { a, b, c } => {
                if !(a.is_finite() && *a > 0.0 && b.is_finite() && c.is_finite() && *c > 0.0) {
                    return Err(inv(format!(
                        "inverse-power-exponential needs a > 0, c > 0, got a={a}, b={b}, c={c}"
                    )));
                }
                let (lo, hi) = match truncation {
                    Some(t) => t,
                    None => {
                        return Err(SpecError::NonNormalizable(
                            "inverse-power-exponential requires truncation cutoffs".into(),
                        ))
                    }
                };
                if !hi.is_finite() && *b <= 1.0 {
                    return Err(SpecError::NonNormalizable(format!(
                        "x^{{-{b}}} tail is not integrable without an upper cutoff"
                    )));
                }
                let kc = kind.clone();
                let raw = move |x| raw_density_at(&kc, x);
                let hi_eff = if hi.is_finite() { hi } else { effective_upper(&raw, lo) };
                let norm = quad::integrate_log_axis(&raw, lo, hi_eff, 1e-10)
                    .map_err(|e| SpecError::NonNormalizable(e.to_string()))?
                    .value;
                if !(norm.is_finite() && norm > 1e-300) {
                    return Err(inv("truncation leaves no mass".into()));
                }
                let grid = table::log_grid(lo, hi_eff, SAMPLER_TABLE_NODES);
                let tbl = QuantileTable::from_density(&grid, &raw)
                    .map_err(SpecError::InvalidParameter)?;
                Ok(Self {
                    support: (lo, hi),
                    norm,
                    sampler: Sampler::Table(tbl),
                    kind,
                    truncation,
                })
            }
            PopulationKind::TabulatedInverseCdf { grid } => {
                let tbl = QuantileTable::from_grid(grid).map_err(SpecError::InvalidParameter)?;
                let tbl = match truncation {
                    None => tbl,
                    Some((lo, hi)) => tbl
                        .truncated(lo, hi)
                        .map_err(SpecError::InvalidParameter)?,
                };
                Ok(Self {
                    support: tbl.support(),
                    norm: 1.0,
                    sampler: Sampler::Table(tbl),
                    kind,
                    truncation,
                })
            }
        }
    }

    /// Normalized density at `x`; zero outside the (truncated) support.
    /// Point masses (Delta, tabulated atoms) evaluate to infinity at their
    /// location.
    pub fn density(&self, x: f64) -> f64 {
        if !x.is_finite() || x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        match &self.kind {
            PopulationKind::Delta { location } => {
                if x == *location {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PopulationKind::TabulatedInverseCdf { .. } => match &self.sampler {
                Sampler::Table(t) => t.density(x),
                _ => unreachable!(),
            },
            kind => raw_density_at(kind, x) / self.norm,
        }
    }

    /// CDF at `x` of the truncated, renormalized population.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support;
        if x < lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match &self.kind {
            PopulationKind::Delta { location } => {
                if x >= *location {
                    1.0
                } else {
                    0.0
                }
            }
            PopulationKind::Exponential { rate } => {
                let f_lo = if lo > 0.0 { -(-rate * lo).exp_m1() } else { 0.0 };
                (((-(-rate * x).exp_m1()) - f_lo) / self.norm).clamp(0.0, 1.0)
            }
            PopulationKind::GeneralizedGamma { nu, eta } => {
                let shape = nu / eta;
                let f_lo = if lo > 0.0 { gamma_lr(shape, lo.powf(*eta)) } else { 0.0 };
                ((gamma_lr(shape, x.powf(*eta)) - f_lo) / self.norm).clamp(0.0, 1.0)
            }
            PopulationKind::OneSidedLevyExtremal { alpha } => {
                let f_lo = if lo > 0.0 { stable::cdf(*alpha, lo) } else { 0.0 };
                ((stable::cdf(*alpha, x) - f_lo) / self.norm).clamp(0.0, 1.0)
            }
            PopulationKind::InversePowerExp { .. } | PopulationKind::TabulatedInverseCdf { .. } => {
                match &self.sampler {
                    Sampler::Table(t) => t.cdf(x),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// Draws `out.len()` independent values.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.sampler {
            Sampler::Constant(v) => out.fill(*v),
            Sampler::ExponentialInverse { rate, u_lo, u_span } => {
                for x in out.iter_mut() {
                    let u: f64 = rng.random();
                    let p = u_lo + u * u_span;
                    *x = -(-p).ln_1p() / rate;
                }
            }
            Sampler::GammaPower { shape, inv_eta } => {
                let g = rand_distr::Gamma::new(*shape, 1.0).expect("validated shape");
                for x in out.iter_mut() {
                    *x = g.sample(rng).powf(*inv_eta);
                }
            }
            Sampler::LevyTransform { alpha } => {
                for x in out.iter_mut() {
                    let u1 = open_unit(rng.random());
                    let u2 = open_unit(rng.random());
                    *x = stable::transform(*alpha, u1, u2);
                }
            }
            Sampler::Table(t) => {
                for x in out.iter_mut() {
                    *x = t.quantile(rng.random());
                }
            }
        }
    }

    /// Draws `n` independent values.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.sample_into(rng, &mut out);
        out
    }

    /// E[h(X)] for the truncated, renormalized population. Evaluated in
    /// closed form for point masses, in probability space for tabulated
    /// specs, and by adaptive log-axis quadrature against the density
    /// otherwise. Reports divergence for non-integrable combinations.
    pub fn expectation<F: Fn(f64) -> f64>(&self, h: F) -> Result<f64, QuadError> {
        self.expectation_tol(h, quad::DEFAULT_REL_TOL)
    }

    pub fn expectation_tol<F: Fn(f64) -> f64>(&self, h: F, rel_tol: f64) -> Result<f64, QuadError> {
        match (&self.kind, &self.sampler) {
            (PopulationKind::Delta { location }, _) => Ok(h(*location)),
            (PopulationKind::TabulatedInverseCdf { .. }, Sampler::Table(t)) => {
                Ok(t.expectation(h))
            }
            _ => {
                let (lo, hi) = self.support;
                quad::integrate_log_axis(|x| self.density(x) * h(x), lo, hi, rel_tol)
                    .map(|r| r.value)
            }
        }
    }
}

#[inline]
fn open_unit(u: f64) -> f64 {
    u.clamp(1e-16, 1.0 - 1e-16)
}

/// Raw (pre-truncation) density of a non-degenerate, non-tabulated kind.
fn raw_density_at(kind: &PopulationKind, x: f64) -> f64 {
    match kind {
        PopulationKind::Exponential { rate } => rate * (-rate * x).exp(),
        PopulationKind::GeneralizedGamma { nu, eta } => {
            eta * x.powf(nu - 1.0) * (-x.powf(*eta)).exp() / gamma(nu / eta)
        }
        PopulationKind::OneSidedLevyExtremal { alpha } => stable::density(*alpha, x),
        PopulationKind::InversePowerExp { a, b, c } => a * x.powf(-b) * (-x.powf(-c)).exp(),
        _ => unreachable!("raw density undefined for degenerate/tabulated kinds"),
    }
}

/// Upper bound beyond which the raw density's remaining mass is negligible,
/// found by doubling.
fn effective_upper<F: Fn(f64) -> f64>(raw: &F, lo: f64) -> f64 {
    let mut hi = (lo * 2.0).max(1.0);
    for _ in 0..80 {
        if raw(hi) * hi < 1e-16 {
            return hi;
        }
        hi *= 2.0;
    }
    hi
}

/// Builds a sampler table for a truncated analytic kind, padding the upper
/// end with the CDF when the window is half-open.
fn build_table<F, C>(raw: &F, lo: f64, hi: f64, cdf: C) -> Result<QuantileTable, String>
where
    F: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    let hi_eff = if hi.is_finite() {
        hi
    } else {
        // Extend until the conditional tail mass is negligible.
        let mut upper = (lo * 2.0).max(1.0);
        let base = cdf(lo);
        for _ in 0..200 {
            if 1.0 - cdf(upper) < 1e-12 * (1.0 - base).max(1e-300) {
                break;
            }
            upper *= 2.0;
        }
        upper
    };
    let grid = table::log_grid(lo, hi_eff, SAMPLER_TABLE_NODES);
    QuantileTable::from_density(&grid, raw)
}

/// One realization's derived per-particle parameters.
///
/// Invariants: mass[κ] = √(σ0/σ[κ]), gamma[κ] = mass[κ]/τ[κ],
/// total_mass = Σ mass[κ], lambda = σ0/total_mass², lambda·total_mass² = σ0.
#[derive(Debug, Clone)]
pub struct ParticleParams {
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mass: Vec<f64>,
    pub gamma: Vec<f64>,
    pub total_mass: f64,
    pub lambda: f64,
    pub sigma0: f64,
    pub n: usize,
}

/// Derives masses and aggregates from drawn (τ, σ) arrays.
pub fn derive_particle_params(
    tau: &[f64],
    sigma: &[f64],
    sigma0: f64,
) -> Result<ParticleParams, InputError> {
    if tau.is_empty() || tau.len() != sigma.len() {
        return Err(InputError(format!(
            "tau and sigma must have equal non-zero length, got {} and {}",
            tau.len(),
            sigma.len()
        )));
    }
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(InputError(format!("sigma0 must be positive, got {sigma0}")));
    }
    let n = tau.len();
    let mut mass = Vec::with_capacity(n);
    let mut gamma_arr = Vec::with_capacity(n);
    let mut total_mass = 0.0;
    for k in 0..n {
        if !(tau[k].is_finite() && tau[k] > 0.0 && sigma[k].is_finite() && sigma[k] > 0.0) {
            return Err(InputError(format!(
                "entries must be positive and finite, got tau={}, sigma={}",
                tau[k], sigma[k]
            )));
        }
        let m = (sigma0 / sigma[k]).sqrt();
        mass.push(m);
        gamma_arr.push(m / tau[k]);
        total_mass += m;
    }
    let lambda = sigma0 / (total_mass * total_mass);
    if !(total_mass.is_finite() && lambda.is_finite() && lambda > 0.0) {
        return Err(InputError("derived mass aggregates are not finite".into()));
    }
    Ok(ParticleParams {
        tau: tau.to_vec(),
        sigma: sigma.to_vec(),
        mass,
        gamma: gamma_arr,
        total_mass,
        lambda,
        sigma0,
        n,
    })
}

/// Density of the total mass M induced by the density f of Λ = σ0/M²:
/// g(M) = (2σ0/M³) f(σ0/M²), the change-of-variables Jacobian of Λ ↦ M.
pub fn mass_density_from_lambda(
    f: &PopulationSpec,
    sigma0: f64,
    m_val: f64,
) -> Result<f64, InputError> {
    if !(m_val.is_finite() && m_val > 0.0) {
        return Err(InputError(format!("mass must be positive, got {m_val}")));
    }
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(InputError(format!("sigma0 must be positive, got {sigma0}")));
    }
    let lambda = sigma0 / (m_val * m_val);
    Ok(2.0 * sigma0 / (m_val * m_val * m_val) * f.density(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::rng::{stream, StreamKey};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_rng(tag: u64) -> rand_chacha::ChaCha8Rng {
        stream(StreamKey {
            seed: 0xC0FFEE,
            namespace: 1000,
            realization: tag,
            substream: 0,
        })
    }

    #[test]
    fn delta_sampling_is_degenerate() {
        let spec = PopulationSpec::delta(2.0).unwrap();
        let mut rng = test_rng(0);
        let xs = spec.sample(3, &mut rng);
        assert_eq!(xs, vec![2.0, 2.0, 2.0]);
        // Sample variance of draws is exactly zero.
        let xs = spec.sample(1000, &mut rng);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        assert_eq!(var, 0.0);
    }

    #[test]
    fn exponential_sample_mean() {
        let spec = PopulationSpec::exponential(1.0).unwrap();
        let mut rng = test_rng(1);
        let n = 1_000_000;
        let mut acc = 0.0;
        let mut buf = vec![0.0; 8192];
        let mut left = n;
        while left > 0 {
            let take = left.min(buf.len());
            spec.sample_into(&mut rng, &mut buf[..take]);
            acc += buf[..take].iter().sum::<f64>();
            left -= take;
        }
        let mean = acc / n as f64;
        // 3-sigma Monte Carlo band around the unit mean: 3/sqrt(n) = 0.003.
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn exponential_density_values() {
        let spec = PopulationSpec::exponential(1.0).unwrap();
        assert_relative_eq!(spec.density(0.0), 1.0);
        assert_relative_eq!(spec.density(2.0), (-2.0f64).exp());
        assert_eq!(spec.density(-1.0), 0.0);
    }

    #[test]
    fn generalized_gamma_density_normalizes() {
        let spec = PopulationSpec::generalized_gamma(0.5, 1.3).unwrap();
        let r = quad::integrate_half_line(|x| spec.density(x), 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "integral {}", r.value);
    }

    #[test]
    fn levy_density_spot_value() {
        let spec = PopulationSpec::one_sided_levy(0.5).unwrap();
        let expected = (-0.25f64).exp() / (2.0 * std::f64::consts::PI.sqrt());
        assert_relative_eq!(spec.density(1.0), expected, epsilon = 1e-9);
    }

    #[test]
    fn levy_histogram_matches_closed_form() {
        // alpha = 1/2 draws against the Lévy-Smirnov law, checked both in
        // sup-norm on bin-averaged densities and by a binned chi-square.
        let spec = PopulationSpec::one_sided_levy(0.5).unwrap();
        let mut rng = test_rng(2);
        let n = 2_000_000usize;
        let (lo, hi, bins) = (0.1f64, 10.0f64, 99usize);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut in_range = 0u64;
        let mut buf = vec![0.0; 8192];
        let mut left = n;
        while left > 0 {
            let take = left.min(buf.len());
            spec.sample_into(&mut rng, &mut buf[..take]);
            for &x in &buf[..take] {
                if x >= lo && x < hi {
                    let b = ((x - lo) / width) as usize;
                    counts[b.min(bins - 1)] += 1;
                    in_range += 1;
                }
            }
            left -= take;
        }
        // Exact bin masses from the closed-form CDF erfc(1/(2*sqrt(x))).
        let cdf = |x: f64| statrs::function::erf::erfc(1.0 / (2.0 * x.sqrt()));
        let mut sup = 0.0f64;
        let mut chi2 = 0.0f64;
        for b in 0..bins {
            let (a, c) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
            let p = cdf(c) - cdf(a);
            let expected = p * n as f64;
            let observed = counts[b] as f64;
            let dens_emp = observed / (n as f64 * width);
            let dens_true = p / width;
            sup = sup.max((dens_emp - dens_true).abs());
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
        assert!(in_range > 0);
        assert!(sup < 0.01, "sup-norm {sup}");
        let k = bins as f64;
        assert!(chi2 < k + 5.0 * (2.0 * k).sqrt(), "chi2 {chi2}");
    }

    #[test]
    fn levy_tail_exponent_fit() {
        // Empirical survival of alpha = 0.75 draws follows x^{-0.75} over
        // [1e2, 1e4]; log-log regression slope within +-0.05.
        let spec = PopulationSpec::one_sided_levy(0.75).unwrap();
        let mut rng = test_rng(3);
        let n = 2_000_000usize;
        let mut draws = Vec::with_capacity(n);
        let mut buf = vec![0.0; 8192];
        let mut left = n;
        while left > 0 {
            let take = left.min(buf.len());
            spec.sample_into(&mut rng, &mut buf[..take]);
            draws.extend_from_slice(&buf[..take]);
            left -= take;
        }
        for &x in &draws {
            assert!(x > 0.0);
        }
        let xs: Vec<f64> = (0..13).map(|i| 100.0 * 10f64.powf(i as f64 / 6.0)).collect();
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for &x in &xs {
            let surv = draws.iter().filter(|&&d| d > x).count() as f64 / n as f64;
            lx.push(x.ln());
            ly.push(surv.ln());
        }
        let mx = lx.iter().sum::<f64>() / lx.len() as f64;
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        assert!((slope + 0.75).abs() < 0.05, "tail slope {slope}");
    }

    #[test]
    fn empirical_cdf_matches_density_cdf() {
        // Kolmogorov distance between 1e5 draws and the quadrature CDF
        // stays below 0.01 for every family.
        let specs = vec![
            PopulationSpec::delta(1.5).unwrap(),
            PopulationSpec::exponential(1.0).unwrap(),
            PopulationSpec::generalized_gamma(0.5, 1.3).unwrap(),
            PopulationSpec::one_sided_levy(0.75).unwrap(),
            PopulationSpec::inverse_power_exp(1.0, 0.75, 0.375).unwrap(),
            PopulationSpec::tabulated(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap(),
            PopulationSpec::exponential(1.0)
                .unwrap()
                .with_truncation(0.5, 4.0)
                .unwrap(),
            PopulationSpec::generalized_gamma(0.5, 1.3)
                .unwrap()
                .with_truncation(0.1, 3.0)
                .unwrap(),
        ];
        for (i, spec) in specs.iter().enumerate() {
            let mut rng = test_rng(100 + i as u64);
            let n = 100_000;
            let mut draws = spec.sample(n, &mut rng);
            draws.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            // Evaluate the CDF at a subsample of order statistics: the
            // distance estimate degrades by at most the subsampling step,
            // well inside the asserted bound, and avoids 1e5 quadrature
            // calls for the numeric CDFs.
            let step = (n / 500).max(1);
            let mut dist = 0.0f64;
            let mut j = 0;
            while j < n {
                let x = draws[j];
                let mut k = j;
                while k < n && draws[k] == x {
                    k += 1;
                }
                // Compare ECDF and CDF on both sides of (possibly repeated) x.
                let f_right = spec.cdf(x);
                let f_left = spec.cdf(x.next_down());
                dist = dist
                    .max((f_right - k as f64 / n as f64).abs())
                    .max((f_left - j as f64 / n as f64).abs());
                j = k.max(j + step);
            }
            assert!(dist < 0.01, "spec {i}: Kolmogorov distance {dist}");
        }
    }

    #[test]
    fn derive_particle_params_identity_case() {
        let p = derive_particle_params(&[1.0], &[1.0], 1.0).unwrap();
        assert_eq!(p.mass, vec![1.0]);
        assert_eq!(p.total_mass, 1.0);
        assert_eq!(p.lambda, 1.0);
        assert_eq!(p.gamma, vec![1.0]);
    }

    #[test]
    fn derive_particle_params_hand_values() {
        let p = derive_particle_params(&[1.0, 1.0], &[1.0, 4.0], 1.0).unwrap();
        assert_eq!(p.mass, vec![1.0, 0.5]);
        assert_relative_eq!(p.total_mass, 1.5);
        assert_relative_eq!(p.lambda, 1.0 / 2.25, epsilon = 1e-15);
    }

    #[test]
    fn derive_particle_params_rejects_bad_input() {
        assert!(derive_particle_params(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(derive_particle_params(&[], &[], 1.0).is_err());
        assert!(derive_particle_params(&[-1.0], &[1.0], 1.0).is_err());
        assert!(derive_particle_params(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn mass_density_hand_values() {
        // f uniform on [1, 2]: g(M) = 2 sigma0 / M^3 inside the mapped
        // window, zero outside, and integrates to one.
        let f = PopulationSpec::tabulated(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_relative_eq!(mass_density_from_lambda(&f, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(mass_density_from_lambda(&f, 1.0, 10.0).unwrap(), 0.0);
        assert!(mass_density_from_lambda(&f, 1.0, -1.0).is_err());
        let r = quad::integrate_half_line(|m| mass_density_from_lambda(&f, 1.0, m).unwrap(), 1e-10)
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "mass density mass {}", r.value);
    }

    #[test]
    fn expectation_routes() {
        // Delta: closed form.
        let d = PopulationSpec::delta(3.0).unwrap();
        assert_eq!(d.expectation(|x| x * x).unwrap(), 9.0);
        // Tabulated two-point mixture: exact segment integration.
        let two = PopulationSpec::tabulated(vec![(0.0, 1.0), (0.5, 1.0), (0.5, 2.0), (1.0, 2.0)])
            .unwrap();
        assert_relative_eq!(two.expectation(|x| x).unwrap(), 1.5, epsilon = 1e-12);
        // Exponential mean by quadrature.
        let e = PopulationSpec::exponential(2.0).unwrap();
        assert_relative_eq!(e.expectation(|x| x).unwrap(), 0.5, max_relative = 1e-7);
    }

    #[test]
    fn expectation_divergence_detected() {
        // E[1/x] under Exponential(1) diverges logarithmically at 0.
        let e = PopulationSpec::exponential(1.0).unwrap();
        let err = e.expectation(|x| 1.0 / x).unwrap_err();
        assert!(matches!(err, QuadError::Divergent { .. }));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PopulationSpec::delta(-1.0).is_err());
        assert!(PopulationSpec::exponential(0.0).is_err());
        assert!(PopulationSpec::generalized_gamma(-0.5, 1.0).is_err());
        assert!(PopulationSpec::one_sided_levy(1.0).is_err());
        assert!(PopulationSpec::one_sided_levy(0.0).is_err());
        // Non-monotone tabulated grid.
        assert!(PopulationSpec::tabulated(vec![(0.0, 2.0), (1.0, 1.0)]).is_err());
        // Inverse-power-exponential without an upper cutoff is not
        // normalizable for b <= 1.
        let spec = PopulationSpec::new(
            PopulationKind::InversePowerExp {
                a: 1.0,
                b: 0.75,
                c: 0.375,
            },
            None,
        );
        assert!(matches!(spec, Err(SpecError::NonNormalizable(_))));
        assert!(PopulationSpec::delta(1.0).unwrap().with_truncation(2.0, 3.0).is_err());
    }

    #[test]
    fn inverse_power_exp_normalizes_after_truncation() {
        let spec = PopulationSpec::inverse_power_exp(1.0, 0.75, 0.375).unwrap();
        let (lo, hi) = spec.support();
        assert_eq!((lo, hi), IPE_DEFAULT_TRUNCATION);
        let r = quad::integrate_log_axis(|x| spec.density(x), lo, hi, 1e-9).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "integral {}", r.value);
    }

    proptest! {
        #[test]
        fn lambda_total_mass_identity(
            sigma0 in 1e-3..1e3f64,
            taus in proptest::collection::vec(1e-3..1e3f64, 1..20),
            sigmas in proptest::collection::vec(1e-3..1e3f64, 1..20),
        ) {
            let n = taus.len().min(sigmas.len());
            let p = derive_particle_params(&taus[..n], &sigmas[..n], sigma0).unwrap();
            // Definitional identity Lambda * M^2 = sigma0.
            prop_assert!((p.lambda * p.total_mass * p.total_mass / sigma0 - 1.0).abs() < 1e-12);
            for k in 0..n {
                prop_assert!((p.mass[k] - (sigma0 / p.sigma[k]).sqrt()).abs() <= 1e-12 * p.mass[k]);
                prop_assert!((p.gamma[k] - p.mass[k] / p.tau[k]).abs() <= 1e-12 * p.gamma[k]);
            }
        }

        #[test]
        fn sigma0_scaling_consistency(
            taus in proptest::collection::vec(1e-2..1e2f64, 2..12),
            sigmas in proptest::collection::vec(1e-2..1e2f64, 2..12),
        ) {
            let n = taus.len().min(sigmas.len());
            let p1 = derive_particle_params(&taus[..n], &sigmas[..n], 1.0).unwrap();
            let p2 = derive_particle_params(&taus[..n], &sigmas[..n], 2.0).unwrap();
            let s = 2.0f64.sqrt();
            for k in 0..n {
                prop_assert!((p2.mass[k] / p1.mass[k] - s).abs() < 1e-12);
            }
            prop_assert!((p2.total_mass / p1.total_mass - s).abs() < 1e-12);
            prop_assert!((p2.lambda * p2.total_mass * p2.total_mass / 2.0 - 1.0).abs() < 1e-12);
        }
    }
}
