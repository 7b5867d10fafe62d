//! Empirical estimators and hypothesis tests.
//!
//! The equivalence claims are one-point distributional statements, so the
//! workhorse is the two-sample Kolmogorov-Smirnov test with the asymptotic
//! Kolmogorov p-value at effective size n1*n2/(n1+n2). Variance curves use
//! jackknifed autocovariance estimates; anomalous scaling is read off a
//! log-log least-squares fit.

use crate::engine::TrajectoryBatch;

#[derive(Debug, Clone, PartialEq)]
pub struct StatsError(pub String);

impl std::fmt::Display for StatsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid statistics input: {}", self.0)
    }
}

impl std::error::Error for StatsError {}

/// Two-sample KS outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sided two-sample Kolmogorov-Smirnov test.
///
/// The statistic is sup |ECDF_x - ECDF_y| evaluated just after each point
/// of the merged sorted support (which resolves ties across samples); the
/// p-value is the asymptotic Kolmogorov series at lambda = sqrt(ne) * D
/// with ne = n1*n2/(n1+n2).
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError("samples must be non-empty".into()));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-NaN sample"));
    ys.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-NaN sample"));

    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n1 || j < n2 {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => break,
        };
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        if diff > d {
            d = diff;
        }
    }

    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(ne.sqrt() * d),
        n1,
        n2,
    })
}

/// Asymptotic Kolmogorov survival function Q(l) = 2 Sum (-1)^{k-1} e^{-2k^2 l^2}
/// (first 100 terms). For tiny l the series is numerically all-ones; the
/// limit there is 1.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.04 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Empirical autocovariance of a batch between two grid indices, with a
/// leave-one-out jackknife standard error.
pub fn autocovariance(
    batch: &TrajectoryBatch,
    t_idx: usize,
    s_idx: usize,
) -> Result<(f64, f64), StatsError> {
    let t_len = batch.n_times();
    if t_idx >= t_len || s_idx >= t_len {
        return Err(StatsError(format!(
            "indices ({t_idx}, {s_idx}) outside grid of length {t_len}"
        )));
    }
    let a = batch.column(t_idx);
    let b = batch.column(s_idx);
    let r = a.len();
    if r < 2 {
        return Err(StatsError("need at least two realizations".into()));
    }
    let rf = r as f64;
    let sum_ab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    let cov = sum_ab / rf - (sum_a / rf) * (sum_b / rf);

    // Leave-one-out estimates from the precomputed sums.
    let rm1 = rf - 1.0;
    let mut mean_loo = 0.0;
    let mut est = Vec::with_capacity(r);
    for k in 0..r {
        let c = (sum_ab - a[k] * b[k]) / rm1
            - ((sum_a - a[k]) / rm1) * ((sum_b - b[k]) / rm1);
        est.push(c);
        mean_loo += c;
    }
    mean_loo /= rf;
    let var_jack: f64 = est.iter().map(|c| (c - mean_loo) * (c - mean_loo)).sum::<f64>() * rm1
        / rf;
    Ok((cov, var_jack.sqrt()))
}

/// Least-squares fit of log(variance) against log(t) over an index window.
/// Returns (slope, intercept, r squared).
pub fn scaling_exponent(
    t_values: &[f64],
    variances: &[f64],
    window: std::ops::Range<usize>,
) -> Result<(f64, f64, f64), StatsError> {
    if t_values.len() != variances.len() {
        return Err(StatsError("t and variance arrays differ in length".into()));
    }
    if window.end > t_values.len() || window.len() < 3 {
        return Err(StatsError(format!(
            "window {window:?} invalid for {} points (need length >= 3)",
            t_values.len()
        )));
    }
    let mut lx = Vec::with_capacity(window.len());
    let mut ly = Vec::with_capacity(window.len());
    for i in window {
        if !(t_values[i] > 0.0 && variances[i] > 0.0) {
            return Err(StatsError("log-log fit needs positive values".into()));
        }
        lx.push(t_values[i].ln());
        ly.push(variances[i].ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Histogram-based density estimate. Out-of-range values land in the
/// overflow tally and are excluded from the normalization.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// In-range observation count.
    pub total: u64,
    pub overflow: u64,
    /// Heights normalized so the histogram integrates to one.
    pub normalized_heights: Vec<f64>,
}

pub fn histogram(
    sample: &[f64],
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<DensityEstimate, StatsError> {
    if bins == 0 {
        return Err(StatsError("need at least one bin".into()));
    }
    if sample.is_empty() {
        return Err(StatsError("empty sample".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => (lo, hi),
        None => {
            let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
    };
    if !(lo < hi) {
        return Err(StatsError(format!("invalid range ({lo}, {hi})")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut overflow = 0u64;
    for &x in sample {
        if x >= lo && x <= hi {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        } else {
            overflow += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError("no observations in range".into()));
    }
    let normalized_heights = counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * width))
        .collect();
    let bin_edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    Ok(DensityEstimate {
        bin_edges,
        counts,
        total,
        overflow,
        normalized_heights,
    })
}
