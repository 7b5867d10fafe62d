//! One-sided (extremal, totally skewed) alpha-stable law on the positive
//! half-line, normalized so the Laplace transform is E[e^{-sX}] = e^{-s^α},
//! 0 < α < 1. For α = 1/2 this is the Lévy-Smirnov density
//! x^{-3/2} e^{-1/(4x)} / (2√π); the right tail is α x^{-α-1}/Γ(1-α).

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::quad;

/// Exact Chambers-Mallows-Stuck / Kanter transform: two uniforms, no
/// rejection. `u1`, `u2` must lie in (0, 1).
pub fn transform(alpha: f64, u1: f64, u2: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let v = PI * (u1 - 0.5); // uniform on (-pi/2, pi/2)
    let w = -u2.ln(); // Exp(1)
    let phi = alpha * (v + PI / 2.0);
    let a = phi.sin() / v.cos().powf(1.0 / alpha);
    let b = ((v - phi).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Number of tail-series terms tried before falling back to the integral
/// representation.
const TAIL_MAX_TERMS: usize = 120;

/// Series for the density at large argument:
/// f(x) = (1/π) Σ_{n≥1} (-1)^{n+1} Γ(nα+1)/n! sin(nπα) x^{-nα-1}.
/// Returns None if not converged within the term budget.
fn density_tail_series(alpha: f64, x: f64) -> Option<f64> {
    let lx = x.ln();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Neumaier compensation
    let mut small_envelopes = 0usize;
    for n in 1..=TAIL_MAX_TERMS {
        let nf = n as f64;
        // Envelope = |term| with sin(nπα) replaced by 1; it bounds the
        // remainder even when sin vanishes at this n.
        let envelope = (ln_gamma(nf * alpha + 1.0) - ln_gamma(nf + 1.0) - (nf * alpha + 1.0) * lx)
            .exp();
        let s = (nf * PI * alpha).sin();
        let term = if n % 2 == 1 { 1.0 } else { -1.0 } * s * envelope;
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
        if envelope < 1e-16 * sum.abs().max(1e-300) {
            small_envelopes += 1;
            if small_envelopes >= 2 {
                return Some(((sum + comp) / PI).max(0.0));
            }
        } else {
            small_envelopes = 0;
        }
    }
    None
}

/// Zolotarev's integral representation, valid for all x > 0:
/// f(x) = [α/(1-α)] x^{1/(α-1)} (1/π) ∫_0^π A(φ) e^{-c A(φ)} dφ,
/// c = x^{-α/(1-α)}, with a strictly increasing positive A(φ). The
/// integrand is evaluated in log space to stay finite near both endpoints.
fn density_zolotarev(alpha: f64, x: f64) -> f64 {
    let c = x.powf(-alpha / (1.0 - alpha));
    let a0 = alpha.powf(alpha / (1.0 - alpha)) * (1.0 - alpha);
    if c * a0 > 700.0 {
        // The whole integrand underflows: the left tail is this thin.
        return 0.0;
    }
    let ln_a = |phi: f64| -> f64 {
        (alpha / (1.0 - alpha)) * (alpha * phi).sin().ln() + ((1.0 - alpha) * phi).sin().ln()
            - (phi.sin().ln()) / (1.0 - alpha)
    };
    let integrand = |phi: f64| -> f64 {
        if phi <= 0.0 || phi >= PI {
            return 0.0;
        }
        let la = ln_a(phi);
        if !la.is_finite() {
            return 0.0;
        }
        let e = la - c * la.exp();
        if e < -745.0 {
            0.0
        } else {
            e.exp()
        }
    };
    let r = quad::integrate(integrand, 0.0, PI, 1e-10);
    (alpha / (1.0 - alpha)) * x.powf(1.0 / (alpha - 1.0)) * r.value / PI
}

/// Density of the extremal stable law at `x`.
pub fn density(alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        if let Some(v) = density_tail_series(alpha, x) {
            return v;
        }
    }
    density_zolotarev(alpha, x)
}

/// Survival function 1 - F(x) from the term-wise integrated tail series,
/// usable for x ≥ 1; returns None when not converged.
fn survival_tail_series(alpha: f64, x: f64) -> Option<f64> {
    let lx = x.ln();
    let mut sum = 0.0f64;
    let mut small_envelopes = 0usize;
    for n in 1..=TAIL_MAX_TERMS {
        let nf = n as f64;
        let envelope = (ln_gamma(nf * alpha) - ln_gamma(nf + 1.0) - nf * alpha * lx).exp();
        let s = (nf * PI * alpha).sin();
        sum += if n % 2 == 1 { 1.0 } else { -1.0 } * s * envelope;
        if envelope < 1e-15 * sum.abs().max(1e-300) {
            small_envelopes += 1;
            if small_envelopes >= 2 {
                return Some((sum / PI).clamp(0.0, 1.0));
            }
        } else {
            small_envelopes = 0;
        }
    }
    None
}

/// CDF of the extremal stable law.
pub fn cdf(alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        if let Some(s) = survival_tail_series(alpha, x) {
            return 1.0 - s;
        }
    }
    // Left part by quadrature of the density on the log axis; the density
    // vanishes superexponentially at 0 so the window converges fast.
    match quad::integrate_log_axis(|t| density(alpha, t), 0.0, x, 1e-10) {
        Ok(r) => r.value.clamp(0.0, 1.0),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn levy_smirnov(x: f64) -> f64 {
        x.powf(-1.5) * (-1.0 / (4.0 * x)).exp() / (2.0 * PI.sqrt())
    }

    #[test]
    fn density_matches_levy_smirnov_closed_form() {
        // α = 1/2 has a closed form; both series and integral branches must
        // reproduce it.
        for &x in &[0.05, 0.1, 0.3, 0.7, 0.99, 1.0, 1.5, 3.0, 10.0, 100.0] {
            assert_relative_eq!(density(0.5, x), levy_smirnov(x), max_relative = 1e-8);
        }
    }

    #[test]
    fn density_at_one_quarter_exponent() {
        // Frozen spot value: f(1) for α = 1/2 is e^{-1/4}/(2√π).
        let expected = (-0.25f64).exp() / (2.0 * PI.sqrt());
        assert_relative_eq!(density(0.5, 1.0), expected, epsilon = 1e-10);
        assert_relative_eq!(expected, 0.219_695_8, epsilon = 5e-7);
    }

    #[test]
    fn branches_agree_at_switch() {
        for &alpha in &[0.3, 0.5, 0.75, 0.9] {
            for &x in &[1.0, 1.2, 1.7, 2.5] {
                let series = density_tail_series(alpha, x);
                if let Some(s) = series {
                    let z = density_zolotarev(alpha, x);
                    assert_relative_eq!(s, z, max_relative = 1e-7);
                }
            }
        }
    }

    #[test]
    fn density_normalizes() {
        for &alpha in &[0.4, 0.75] {
            let r = quad::integrate_half_line(|x| density(alpha, x), 1e-9).unwrap();
            assert_relative_eq!(r.value, 1.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn cdf_is_consistent_with_density() {
        let alpha = 0.75;
        for &x in &[0.5, 1.0, 2.0, 10.0] {
            let direct = cdf(alpha, x);
            let integrated = quad::integrate_log_axis(|t| density(alpha, t), 0.0, x, 1e-10)
                .unwrap()
                .value;
            assert_relative_eq!(direct, integrated, epsilon = 1e-7);
        }
    }

    #[test]
    fn sampler_matches_laplace_transform() {
        // E[e^{-X}] = e^{-1} for every alpha under this normalization.
        let mut rng = crate::rng::stream(crate::rng::StreamKey {
            seed: 7,
            namespace: 99,
            realization: 0,
            substream: 0,
        });
        for &alpha in &[0.25, 0.5, 0.75] {
            let n = 400_000;
            let mut acc = 0.0;
            for _ in 0..n {
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                acc += (-transform(alpha, u1, u2)).exp();
            }
            let mean = acc / n as f64;
            let expected = (-1.0f64).exp();
            // std of e^{-X} is below 0.35; 4 sigma band.
            let band = 4.0 * 0.35 / (n as f64).sqrt();
            assert!(
                (mean - expected).abs() < band,
                "alpha={alpha}: {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn sampler_produces_only_positive_values() {
        let mut rng = crate::rng::stream(crate::rng::StreamKey {
            seed: 11,
            namespace: 99,
            realization: 1,
            substream: 0,
        });
        for _ in 0..10_000 {
            let x = transform(0.75, rng.random(), rng.random());
            assert!(x > 0.0 && x.is_finite());
        }
    }
}
