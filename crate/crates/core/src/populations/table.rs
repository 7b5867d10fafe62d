//! Numerical inverse-CDF tables.
//!
//! One mechanism covers every population without a closed-form inverse CDF:
//! a monotone (probability, quantile) table, sampled by inverting a uniform
//! draw with linear interpolation. Tables either come straight from user
//! configuration or are built from a density on a log-spaced grid.
//! Expectations against a table integrate in probability space,
//! E[h] = ∫_0^1 h(Q(u)) du, segment by segment, which is exact for tables
//! encoding atoms (repeated probability values).

use crate::quad;

#[derive(Debug, Clone)]
pub struct QuantileTable {
    /// Non-decreasing probabilities spanning [0, 1].
    u: Vec<f64>,
    /// Non-decreasing quantiles.
    x: Vec<f64>,
}

impl QuantileTable {
    /// Validates and adopts a user-provided grid of (probability, quantile)
    /// pairs.
    pub fn from_grid(grid: &[(f64, f64)]) -> Result<Self, String> {
        if grid.len() < 2 {
            return Err("inverse-CDF grid needs at least two nodes".into());
        }
        for &(u, x) in grid {
            if !u.is_finite() || !x.is_finite() {
                return Err("inverse-CDF grid contains non-finite entries".into());
            }
            if !(0.0..=1.0).contains(&u) {
                return Err(format!("grid probability {u} outside [0, 1]"));
            }
            if x <= 0.0 {
                return Err(format!("grid quantile {x} not strictly positive"));
            }
        }
        if grid[0].0 != 0.0 || grid[grid.len() - 1].0 != 1.0 {
            return Err("grid probabilities must start at 0 and end at 1".into());
        }
        for w in grid.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err("inverse-CDF grid must be non-decreasing in both columns".into());
            }
        }
        Ok(Self {
            u: grid.iter().map(|p| p.0).collect(),
            x: grid.iter().map(|p| p.1).collect(),
        })
    }

    /// Builds a table from density values on a strictly increasing grid.
    /// Per-segment masses are integrated with a Kronrod panel and the
    /// cumulative sum is normalized to [0, 1].
    pub fn from_density<F: Fn(f64) -> f64>(grid: &[f64], density: F) -> Result<Self, String> {
        if grid.len() < 2 {
            return Err("density grid needs at least two nodes".into());
        }
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in grid.windows(2) {
            let (v, _) = quad::panel15(&&density, w[0], w[1]);
            acc += v.max(0.0);
            cdf.push(acc);
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err("density has no mass on the table grid".into());
        }
        for c in &mut cdf {
            *c = (*c / acc).clamp(0.0, 1.0);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self {
            u: cdf,
            x: grid.to_vec(),
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// The table as (probability, quantile) pairs.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.u.iter().copied().zip(self.x.iter().copied()).collect()
    }

    /// Inverse CDF by linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // Last index with u[i] <= u.
        let i = match self.u.binary_search_by(|v| v.partial_cmp(&u).unwrap()) {
            Ok(mut i) => {
                while i + 1 < self.u.len() && self.u[i + 1] == u {
                    i += 1;
                }
                i
            }
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.u.len() {
            return *self.x.last().unwrap();
        }
        let du = self.u[i + 1] - self.u[i];
        if du <= 0.0 {
            self.x[i]
        } else {
            let w = (u - self.u[i]) / du;
            self.x[i] + w * (self.x[i + 1] - self.x[i])
        }
    }

    /// Forward CDF lookup (piecewise linear in x).
    pub fn cdf(&self, xq: f64) -> f64 {
        if xq <= self.x[0] {
            return 0.0;
        }
        if xq >= *self.x.last().unwrap() {
            return 1.0;
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => return self.u[i],
            Err(i) => i - 1,
        };
        let dx = self.x[i + 1] - self.x[i];
        if dx <= 0.0 {
            self.u[i + 1]
        } else {
            self.u[i] + (self.u[i + 1] - self.u[i]) * (xq - self.x[i]) / dx
        }
    }

    /// Piecewise density du/dx. Atoms (flat-in-probability jumps) evaluate
    /// to infinity at their location.
    pub fn density(&self, xq: f64) -> f64 {
        let (lo, hi) = self.support();
        if xq < lo || xq > hi {
            return 0.0;
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => {
                // Check for an atom at this exact quantile.
                let (mut a, mut b) = (i, i);
                while a > 0 && self.x[a - 1] == xq {
                    a -= 1;
                }
                while b + 1 < self.x.len() && self.x[b + 1] == xq {
                    b += 1;
                }
                if self.u[b] > self.u[a] {
                    return f64::INFINITY;
                }
                i.min(self.x.len() - 2)
            }
            Err(i) => i - 1,
        };
        let dx = self.x[i + 1] - self.x[i];
        let du = self.u[i + 1] - self.u[i];
        if dx <= 0.0 {
            f64::INFINITY
        } else {
            du / dx
        }
    }

    /// E[h(X)] = ∫_0^1 h(Q(u)) du, one Kronrod panel per table segment
    /// (h ∘ Q is smooth within a segment, so a single panel is exact to
    /// working precision there; atoms contribute their mass times h). The
    /// first and last segments are integrated under a quadratic
    /// substitution so that integrable endpoint singularities of h (such
    /// as the λ^{-1/2} weight of Gaussian scale mixtures at the origin)
    /// are regularized instead of hitting the panel rule directly.
    pub fn expectation<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        let n_seg = self.u.len() - 1;
        let mut total = 0.0;
        for i in 0..n_seg {
            let (u0, u1) = (self.u[i], self.u[i + 1]);
            if u1 <= u0 {
                continue;
            }
            let (x0, x1) = (self.x[i], self.x[i + 1]);
            if x1 == x0 {
                total += (u1 - u0) * h(x0);
                continue;
            }
            let du = u1 - u0;
            let q = |u: f64| x0 + (x1 - x0) * (u - u0) / du;
            let v = if i == 0 {
                // u = u0 + du s²: clusters evaluations at the left edge.
                let (v, _) =
                    quad::panel15(&|s: f64| 2.0 * du * s * h(q(u0 + du * s * s)), 0.0, 1.0);
                v
            } else if i == n_seg - 1 {
                let (v, _) =
                    quad::panel15(&|s: f64| 2.0 * du * s * h(q(u1 - du * s * s)), 0.0, 1.0);
                v
            } else {
                let (v, _) = quad::panel15(&|u| h(q(u)), u0, u1);
                v
            };
            total += v;
        }
        total
    }

    /// Restricts the table to quantiles within [lo, hi], renormalizing.
    pub fn truncated(&self, lo: f64, hi: f64) -> Result<Self, String> {
        let u_lo = self.cdf(lo);
        let u_hi = self.cdf(hi);
        if u_hi - u_lo <= 1e-12 {
            return Err("truncation leaves no probability mass".into());
        }
        let mut grid = vec![(0.0, self.quantile(u_lo).max(lo))];
        for i in 0..self.u.len() {
            if self.u[i] > u_lo && self.u[i] < u_hi && self.x[i] >= lo && self.x[i] <= hi {
                grid.push(((self.u[i] - u_lo) / (u_hi - u_lo), self.x[i]));
            }
        }
        grid.push((1.0, self.quantile(u_hi).min(hi)));
        Self::from_grid(&grid)
    }
}

/// Log-spaced grid with `n` nodes on [lo, hi], both positive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_table_roundtrip() {
        let t = QuantileTable::from_grid(&[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_relative_eq!(t.quantile(0.25), 1.25);
        assert_relative_eq!(t.cdf(1.5), 0.5);
        assert_relative_eq!(t.density(1.5), 1.0);
        assert_relative_eq!(t.expectation(|x| x), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn two_point_mixture() {
        // ½ δ(x-1) + ½ δ(x-2) encoded with repeated probabilities.
        let t =
            QuantileTable::from_grid(&[(0.0, 1.0), (0.5, 1.0), (0.5, 2.0), (1.0, 2.0)]).unwrap();
        assert_relative_eq!(t.quantile(0.25), 1.0);
        assert_relative_eq!(t.quantile(0.75), 2.0);
        assert_relative_eq!(t.expectation(|x| x), 1.5, epsilon = 1e-12);
        assert_relative_eq!(t.expectation(|x| x * x), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn from_density_exponential() {
        let grid = log_grid(1e-6, 40.0, 2048);
        let t = QuantileTable::from_density(&grid, |x| (-x).exp()).unwrap();
        assert_relative_eq!(t.quantile(0.5), std::f64::consts::LN_2, epsilon = 1e-5);
        assert_relative_eq!(t.expectation(|x| x), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(QuantileTable::from_grid(&[(0.0, 1.0)]).is_err());
        assert!(QuantileTable::from_grid(&[(0.0, 2.0), (1.0, 1.0)]).is_err());
        assert!(QuantileTable::from_grid(&[(0.1, 1.0), (1.0, 2.0)]).is_err());
        assert!(QuantileTable::from_grid(&[(0.0, -1.0), (1.0, 2.0)]).is_err());
    }
}
