//! Scenario configuration files: TOML key-value documents that expand to
//! one scenario per (distribution, r) combination.

use serde::Deserialize;

use trimmed_match::{Error, Result};

use crate::{EstimatorKind, ScenarioConfig, SizeDistribution};

/// A scalar or a list; lists expand the scenario grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_confidence() -> f64 {
    0.90
}

fn default_estimators() -> Vec<String> {
    vec![
        "empirical".into(),
        "sign".into(),
        "rank".into(),
        "trimmed-0.10".into(),
        "trimmed-auto".into(),
    ]
}

/// On-disk layout of a simulation configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    pub n: usize,
    pub theta0: f64,
    pub r: OneOrMany<f64>,
    pub distribution: OneOrMany<SizeDistribution>,
    #[serde(default)]
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
}

/// Fully expanded run request.
#[derive(Debug, Clone)]
pub struct SimRequest {
    pub scenarios: Vec<ScenarioConfig>,
    pub estimators: Vec<EstimatorKind>,
    pub alpha: f64,
}

impl SimConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    /// Expand to the scenario grid (distribution-major, then r).
    pub fn expand(&self) -> Result<SimRequest> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(
                "confidence must be in (0, 1)".into(),
            ));
        }
        let estimators: Vec<EstimatorKind> = self
            .estimators
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?;
        if estimators.is_empty() {
            return Err(Error::InvalidParameter("no estimators requested".into()));
        }
        let mut scenarios = Vec::new();
        for dist in self.distribution.to_vec() {
            for r in self.r.to_vec() {
                let cfg = ScenarioConfig {
                    n: self.n,
                    distribution: dist,
                    theta0: self.theta0,
                    r,
                    delta: self.delta,
                    replicates: self.replicates,
                    seed: self.seed,
                };
                cfg.validate()?;
                scenarios.push(cfg);
            }
        }
        Ok(SimRequest {
            scenarios,
            estimators,
            alpha: 1.0 - self.confidence,
        })
    }
}
