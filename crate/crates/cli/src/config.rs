//! Run configuration: TOML-syntax key-value text with sections.
//!
//! Unknown keys are rejected. The schema is documented in the repository
//! README; `configs/panel_a.cfg` and `configs/panel_b.cfg` are complete
//! examples.

use std::path::Path;

use serde::Deserialize;

use heterou::engine::{EnsembleParams, LambdaMode, ZhMode};
use heterou::populations::{PopulationKind, PopulationSpec};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; absent or 0 = use all cores.
    pub workers: Option<usize>,
    pub ensemble: EnsembleSection,
    pub time_grid: TimeGridSection,
    pub tau_population: PopulationSection,
    pub sigma_population: PopulationSection,
    #[serde(default)]
    pub equivalence: EquivalenceSection,
    #[serde(default)]
    pub correlation: CorrelationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_particles: usize,
    pub realizations: usize,
    /// Absent selects the σ0 = 1/N convention.
    pub sigma0: Option<f64>,
    pub dt_max: Option<f64>,
    /// "resample-per-realization" (default) or "fixed-across-realizations".
    pub lambda_mode: Option<String>,
    /// "gaussian-closed-form" (default) or "sum-of-y".
    pub zh_mode: Option<String>,
    /// Inert legacy parameter: recorded in reports, used by no formula.
    pub gamma0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSection {
    /// "log", "linear", or "explicit".
    pub kind: String,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    /// Explicit grid, must start at 0.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    /// delta | exponential | generalized-gamma | one-sided-levy |
    /// inverse-power-exp | tabulated-inverse-cdf
    pub kind: String,
    pub location: Option<f64>,
    pub rate: Option<f64>,
    pub nu: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub grid: Option<Vec<(f64, f64)>>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceSection {
    pub times: Option<Vec<f64>>,
    pub significance: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    pub pairs: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// "csv" (default) or "binary".
    pub trajectory_format: Option<String>,
    pub write_trajectories: Option<bool>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<(Self, String), ConfigError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&raw)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, raw))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(mode) = &self.ensemble.lambda_mode {
            parse_lambda_mode(mode)?;
        }
        if let Some(mode) = &self.ensemble.zh_mode {
            parse_zh_mode(mode)?;
        }
        if let Some(fmt) = &self.output.trajectory_format {
            if fmt != "csv" && fmt != "binary" {
                return Err(ConfigError(format!(
                    "output.trajectory_format must be csv or binary, got {fmt}"
                )));
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let g = &self.time_grid;
        let grid = match g.kind.as_str() {
            "explicit" => {
                let values = g
                    .values
                    .clone()
                    .ok_or_else(|| ConfigError("explicit grid needs `values`".into()))?;
                values
            }
            "log" | "linear" => {
                let (start, stop, points) = match (g.start, g.stop, g.points) {
                    (Some(a), Some(b), Some(p)) => (a, b, p),
                    _ => {
                        return Err(ConfigError(
                            "log/linear grids need start, stop and points".into(),
                        ))
                    }
                };
                if !(start > 0.0 && stop > start && points >= 2) {
                    return Err(ConfigError(format!(
                        "grid needs 0 < start < stop and points >= 2, got ({start}, {stop}, {points})"
                    )));
                }
                let mut grid = vec![0.0];
                for i in 0..points {
                    let w = i as f64 / (points - 1) as f64;
                    let t = if g.kind == "log" {
                        10f64.powf(start.log10() + w * (stop.log10() - start.log10()))
                    } else {
                        start + w * (stop - start)
                    };
                    grid.push(t);
                }
                grid
            }
            other => {
                return Err(ConfigError(format!(
                    "time_grid.kind must be log, linear or explicit, got {other}"
                )))
            }
        };
        Ok(grid)
    }

    pub fn ensemble_params(&self) -> Result<EnsembleParams, ConfigError> {
        let params = EnsembleParams {
            n_particles: self.ensemble.n_particles,
            realizations: self.ensemble.realizations,
            sigma0: self.ensemble.sigma0,
            t_grid: self.time_grid()?,
            dt_max: self.ensemble.dt_max,
            q_spec: build_population(&self.tau_population, "tau_population")?,
            g_spec: build_population(&self.sigma_population, "sigma_population")?,
            seed: self.seed,
            lambda_mode: self
                .ensemble
                .lambda_mode
                .as_deref()
                .map(parse_lambda_mode)
                .transpose()?
                .unwrap_or(LambdaMode::ResamplePerRealization),
            zh_mode: self
                .ensemble
                .zh_mode
                .as_deref()
                .map(parse_zh_mode)
                .transpose()?
                .unwrap_or(ZhMode::GaussianClosedForm),
        };
        params
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(params)
    }

    pub fn equivalence_times(&self) -> Vec<f64> {
        self.equivalence
            .times
            .clone()
            .unwrap_or_else(|| vec![1.0, 10.0, 100.0])
    }

    pub fn significance(&self) -> f64 {
        self.equivalence.significance.unwrap_or(0.01)
    }
}

fn parse_lambda_mode(s: &str) -> Result<LambdaMode, ConfigError> {
    match s {
        "resample-per-realization" => Ok(LambdaMode::ResamplePerRealization),
        "fixed-across-realizations" => Ok(LambdaMode::FixedAcrossRealizations),
        other => Err(ConfigError(format!(
            "lambda_mode must be resample-per-realization or fixed-across-realizations, got {other}"
        ))),
    }
}

fn parse_zh_mode(s: &str) -> Result<ZhMode, ConfigError> {
    match s {
        "gaussian-closed-form" => Ok(ZhMode::GaussianClosedForm),
        "sum-of-y" => Ok(ZhMode::SumOfY),
        other => Err(ConfigError(format!(
            "zh_mode must be gaussian-closed-form or sum-of-y, got {other}"
        ))),
    }
}

fn build_population(sec: &PopulationSection, name: &str) -> Result<PopulationSpec, ConfigError> {
    let req = |v: Option<f64>, field: &str| {
        v.ok_or_else(|| ConfigError(format!("{name}: kind {} needs `{field}`", sec.kind)))
    };
    let forbid = |v: bool, field: &str| {
        if v {
            Err(ConfigError(format!(
                "{name}: `{field}` does not apply to kind {}",
                sec.kind
            )))
        } else {
            Ok(())
        }
    };
    let kind = match sec.kind.as_str() {
        "delta" => {
            forbid(sec.rate.is_some(), "rate")?;
            PopulationKind::Delta {
                location: req(sec.location, "location")?,
            }
        }
        "exponential" => {
            forbid(sec.location.is_some(), "location")?;
            PopulationKind::Exponential {
                rate: req(sec.rate, "rate")?,
            }
        }
        "generalized-gamma" => PopulationKind::GeneralizedGamma {
            nu: req(sec.nu, "nu")?,
            eta: req(sec.eta, "eta")?,
        },
        "one-sided-levy" => PopulationKind::OneSidedLevyExtremal {
            alpha: req(sec.alpha, "alpha")?,
        },
        "inverse-power-exp" => PopulationKind::InversePowerExp {
            a: req(sec.a, "a")?,
            b: req(sec.b, "b")?,
            c: req(sec.c, "c")?,
        },
        "tabulated-inverse-cdf" => PopulationKind::TabulatedInverseCdf {
            grid: sec
                .grid
                .clone()
                .ok_or_else(|| ConfigError(format!("{name}: kind {} needs `grid`", sec.kind)))?,
        },
        other => {
            return Err(ConfigError(format!(
                "{name}: unknown population kind {other}"
            )))
        }
    };
    let truncation = match (sec.lower, sec.upper) {
        (None, None) => {
            // The inverse-power-exp family is non-normalizable untruncated;
            // apply the documented default window.
            if matches!(kind, PopulationKind::InversePowerExp { .. }) {
                Some(heterou::populations::IPE_DEFAULT_TRUNCATION)
            } else {
                None
            }
        }
        (lo, hi) => Some((lo.unwrap_or(f64::MIN_POSITIVE), hi.unwrap_or(f64::INFINITY))),
    };
    PopulationSpec::new(kind, truncation).map_err(|e| ConfigError(format!("{name}: {e}")))
}
