//! TOML configuration files.
//!
//! ```toml
//! [agent]
//! eta = 0.5
//! rho = 50.0
//! reservation_utility = 0.0
//!
//! [environment]
//! mean = 0.0
//!
//! [simulation]
//! periods = 20
//! replications = 700
//! master_seed = 20210517
//!
//! [grid]
//! m = [1, 3, "inf"]
//! sigma_multiplier = [0.05, 0.25, 0.45, 0.65]
//! delta = [0.25, 0.5, 0.75]
//! q = [3, 5, 10]
//!
//! [modes]
//! exploration_rule = "calibrated"
//! degenerate_rule = "mean"
//! space_rule = "widest"
//!
//! [reporting]
//! alpha = 0.01
//! interval = "normal"
//! ```
//!
//! Every key is optional; missing keys take the values above.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{scenario_grid, BaseConfig, GridAxes, Modes, Reporting, ScenarioConfig};
use crate::error::{Error, Result};
use crate::model::AgentParams;
use crate::strategy::{degenerate_rules, exploration_rules, interval_estimators, space_rules};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub mean: f64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self { mean: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub periods: usize,
    pub replications: usize,
    pub master_seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let base = BaseConfig::default();
        Self {
            periods: base.periods,
            replications: base.replications,
            master_seed: base.master_seed,
        }
    }
}

/// A complete experiment description, laid out like the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub agent: AgentParams,
    pub environment: EnvironmentSection,
    pub simulation: SimulationSection,
    pub grid: GridAxes,
    pub modes: Modes,
    pub reporting: Reporting,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| describe_toml_error(text, &e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn base(&self) -> BaseConfig {
        BaseConfig {
            agent: self.agent,
            environment_mean: self.environment.mean,
            periods: self.simulation.periods,
            replications: self.simulation.replications,
            master_seed: self.simulation.master_seed,
            modes: self.modes.clone(),
            reporting: self.reporting.clone(),
        }
    }

    /// The full grid in lexicographic order.
    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        scenario_grid(&self.base(), &self.grid)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.agent
            .validate()
            .map_err(|e| Error::Config(format!("[agent] {e}")))?;
        if !self.environment.mean.is_finite() {
            return fail("environment.mean must be finite".into());
        }
        let sim = &self.simulation;
        if sim.periods < 1 {
            return fail(format!("simulation.periods must be >= 1, got {}", sim.periods));
        }
        if sim.replications < 1 {
            return fail(format!("simulation.replications must be >= 1, got {}", sim.replications));
        }
        if sim.master_seed > i64::MAX as u64 {
            return fail(format!("simulation.master_seed must be <= {}, got {}", i64::MAX, sim.master_seed));
        }
        let grid = &self.grid;
        for (name, empty) in [
            ("m", grid.memory.is_empty()),
            ("sigma_multiplier", grid.sigma_multiplier.is_empty()),
            ("delta", grid.delta.is_empty()),
            ("q", grid.q.is_empty()),
        ] {
            if empty {
                return fail(format!("grid.{name} must list at least one value"));
            }
        }
        if let Some(c) = grid.sigma_multiplier.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return fail(format!("grid.sigma_multiplier values must be >= 0, got {c}"));
        }
        if let Some(d) = grid.delta.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return fail(format!("grid.delta values must lie in [0, 1], got {d}"));
        }
        if grid.q.contains(&0) {
            return fail("grid.q values must be >= 1, got 0".into());
        }
        if !(0.0..=1.0).contains(&self.modes.bootstrap_premium) {
            return fail(format!(
                "modes.bootstrap_premium must lie in [0, 1], got {}",
                self.modes.bootstrap_premium
            ));
        }
        let alpha = self.reporting.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return fail(format!("reporting.alpha must lie in (0, 1), got {alpha}"));
        }
        exploration_rules().get(&self.modes.exploration_rule)?;
        degenerate_rules().get(&self.modes.degenerate_rule)?;
        space_rules().get(&self.modes.space_rule)?;
        interval_estimators().get(&self.reporting.interval)?;
        Ok(())
    }
}

/// One-line rendering of a TOML error with its 1-based line number.
fn describe_toml_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().trim().replace('\n', "; ");
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            Error::Config(format!("line {line}: {message}"))
        }
        None => Error::Config(message),
    }
}
