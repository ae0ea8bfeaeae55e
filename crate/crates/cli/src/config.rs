//! Experiment configuration files.
//!
//! A config is a single JSON document:
//!
//! ```json
//! {
//!   "sources": [{"lambda": 1.3, "mu": 2.3}, {"lambda": 1.5, "mu": 2.0}],
//!   "q": 0.5,
//!   "budget": 10.0,
//!   "sweep_budget": {"start": 0.5, "stop": 40.0, "step": 0.05},
//!   "heterogeneity": {"n": 5, "total": 20.0, "lambda": 1.0,
//!                     "k": {"start": 0.2, "stop": 1.0, "step": 0.05}},
//!   "simulate": {"horizon": 1e5, "seed": 42, "replications": 1},
//!   "oracle": {"step": 0.01, "max_sources": 2}
//! }
//! ```
//!
//! Only `q` is always required; each subcommand checks for the sections it
//! needs. Unknown keys are rejected at every level.

use std::path::Path;

use persuasion_core::{GridSpec, ProblemInstance, SourceParams, SourceRates};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// serde_json messages carry the line and column of the offending token.
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid config: {0}")]
    Model(#[from] persuasion_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub lambda: f64,
    pub mu: f64,
}

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn validate(&self, what: &str) -> Result<(), ConfigError> {
        let finite = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !finite || self.step <= 0.0 || self.stop < self.start {
            return Err(ConfigError::Invalid(format!(
                "{what}: grid needs finite start <= stop and step > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Grid points, computed as `start + k * step` to avoid drift.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterogeneitySpec {
    pub n: usize,
    pub total: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub k: RangeSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    /// Explicit per-source `(s, c)`; defaults to the equilibrium policy.
    #[serde(default)]
    pub policy: Option<Vec<RateSpec>>,
}

fn default_horizon() -> f64 {
    1e5
}

fn default_replications() -> u64 {
    1
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            seed: 0,
            replications: default_replications(),
            policy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub s: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub step: f64,
    #[serde(default = "default_oracle_sources")]
    pub max_sources: usize,
}

fn default_oracle_sources() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    sources: Vec<SourceSpec>,
    q: f64,
    #[serde(default)]
    budget: Option<f64>,
    #[serde(default)]
    max_sources: Option<usize>,
    #[serde(default)]
    sweep_budget: Option<RangeSpec>,
    #[serde(default)]
    heterogeneity: Option<HeterogeneitySpec>,
    #[serde(default)]
    simulate: Option<SimulateSpec>,
    #[serde(default)]
    oracle: Option<OracleSpec>,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Present when the config lists sources. Budget defaults to 0 when only
    /// sweeps are configured.
    pub instance: Option<ProblemInstance>,
    pub has_budget: bool,
    pub q: f64,
    pub max_sources: usize,
    pub sweep_budget: Option<RangeSpec>,
    pub heterogeneity: Option<HeterogeneitySpec>,
    pub simulate: Option<SimulateSpec>,
    pub oracle: Option<GridSpec>,
    pub simulate_policy: Option<Vec<SourceRates>>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)?;

        let instance = if raw.sources.is_empty() {
            None
        } else {
            let sources = raw
                .sources
                .iter()
                .map(|s| SourceParams::new(s.lambda, s.mu))
                .collect::<Result<Vec<_>, _>>()?;
            Some(ProblemInstance::new(sources, raw.q, raw.budget.unwrap_or(0.0))?)
        };
        if !(raw.q > 0.0 && raw.q < 1.0) {
            return Err(ConfigError::Invalid(format!("q = {} must lie in (0, 1)", raw.q)));
        }

        if let Some(grid) = &raw.sweep_budget {
            grid.validate("sweep_budget")?;
        }
        if let Some(h) = &raw.heterogeneity {
            h.k.validate("heterogeneity.k")?;
        }
        if let Some(sim) = &raw.simulate {
            if !(sim.horizon.is_finite() && sim.horizon > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "simulate.horizon = {} must be positive",
                    sim.horizon
                )));
            }
            if sim.replications == 0 {
                return Err(ConfigError::Invalid("simulate.replications must be >= 1".into()));
            }
        }
        let simulate_policy = match raw.simulate.as_ref().and_then(|s| s.policy.as_ref()) {
            None => None,
            Some(rates) => {
                let n = raw.sources.len();
                if rates.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "simulate.policy has {} entries for {n} sources",
                        rates.len()
                    )));
                }
                Some(
                    rates
                        .iter()
                        .map(|r| SourceRates::new(r.s, r.c))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
        };
        let oracle = match raw.oracle {
            None => None,
            Some(o) => {
                if !(o.step.is_finite() && o.step > 0.0) || o.max_sources == 0 {
                    return Err(ConfigError::Invalid(format!(
                        "oracle needs step > 0 and max_sources >= 1 (got {o:?})"
                    )));
                }
                Some(GridSpec {
                    step: o.step,
                    max_sources: o.max_sources,
                })
            }
        };

        Ok(Self {
            instance,
            has_budget: raw.budget.is_some(),
            q: raw.q,
            max_sources: raw
                .max_sources
                .unwrap_or(persuasion_core::multi_source::DEFAULT_MAX_SOURCES),
            sweep_budget: raw.sweep_budget,
            heterogeneity: raw.heterogeneity,
            simulate: raw.simulate,
            oracle,
            simulate_policy,
        })
    }

    /// The instance, requiring that the config set `budget` explicitly.
    pub fn budgeted_instance(&self) -> Result<&ProblemInstance, ConfigError> {
        let instance = self.sources_instance()?;
        if !self.has_budget {
            return Err(ConfigError::Invalid("missing top-level `budget`".into()));
        }
        Ok(instance)
    }

    pub fn sources_instance(&self) -> Result<&ProblemInstance, ConfigError> {
        self.instance
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("missing or empty top-level `sources`".into()))
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
        section
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid(format!("missing `{name}` section")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"{
        "sources": [
            {"lambda": 1.3, "mu": 2.3}, {"lambda": 1.8, "mu": 3.8}, {"lambda": 0.7, "mu": 3.2},
            {"lambda": 2.3, "mu": 5.3}, {"lambda": 1.5, "mu": 2.0}
        ],
        "q": 0.5,
        "budget": 10
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::parse(FIG3).unwrap();
        let inst = cfg.budgeted_instance().unwrap();
        assert_eq!(inst.len(), 5);
        assert_eq!(inst.budget(), 10.0);
        assert!(cfg.sweep_budget.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = ExperimentConfig::parse("{\n  \"q\": 0.5,\n  \"bugdet\": 3\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bugdet") && msg.contains("line 3"), "{msg}");

        let err = ExperimentConfig::parse(r#"{"q": 0.5, "sources": [{"lambda": 1, "mu": 2, "nu": 3}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("nu"));
    }

    #[test]
    fn invalid_instance_is_reported() {
        let err = ExperimentConfig::parse(r#"{"q": 0.5, "budget": 1, "sources": [{"lambda": 2, "mu": 1}]}"#)
            .unwrap_err();
        assert!(matches!(err, ConfigError::Model(persuasion_core::Error::InvalidInstance(_))));
    }

    #[test]
    fn grids_are_validated() {
        let bad = r#"{"q": 0.5, "sweep_budget": {"start": 2, "stop": 1, "step": 0.1}}"#;
        assert!(ExperimentConfig::parse(bad).is_err());
        let bad = r#"{"q": 0.5, "sweep_budget": {"start": 0, "stop": 1, "step": 0}}"#;
        assert!(ExperimentConfig::parse(bad).is_err());
    }

    #[test]
    fn range_points_are_inclusive() {
        let grid = RangeSpec {
            start: 0.2,
            stop: 1.0,
            step: 0.05,
        };
        let pts = grid.points();
        assert_eq!(pts.len(), 17);
        assert!((pts[16] - 1.0).abs() < 1e-12);
        let grid = RangeSpec {
            start: 0.5,
            stop: 40.0,
            step: 0.05,
        };
        assert_eq!(grid.points().len(), 791);
    }

    #[test]
    fn missing_sections_are_errors() {
        let cfg = ExperimentConfig::parse(r#"{"q": 0.5}"#).unwrap();
        assert!(cfg.sources_instance().is_err());
        assert!(cfg.section(&cfg.sweep_budget, "sweep_budget").is_err());
        let cfg = ExperimentConfig::parse(r#"{"q": 0.5, "sources": [{"lambda": 1, "mu": 2}]}"#).unwrap();
        assert!(cfg.budgeted_instance().is_err());
    }
}
