//! Interchangeable model rules, registered by name and selected at run
//! time from the configuration.
//!
//! Four families are registered:
//!
//! * [`ExplorationRule`]: which quantile of the fitted estimate
//!   distribution triggers global search (`calibrated`, `literal`).
//! * [`DegenerateRule`]: the search decision when the estimates give no
//!   usable threshold (`bernoulli`, `mean`).
//! * [`SpaceRule`]: which premium the endogenous action space is derived
//!   from each period (`widest`, `previous-premium`).
//! * [`IntervalEstimator`]: per-period confidence bands (`normal`,
//!   `bootstrap`).

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::metrics::{bootstrap_interval, confidence_interval};
use crate::model::AgentParams;
use crate::search::{action_space, widest_action_space, ActionSpace, SearchKind, UniformSource};

pub trait ExplorationRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    /// Quantile level whose exceedance by the last estimate triggers
    /// exploration, for propensity `delta` in (0, 1).
    fn quantile_level(&self, delta: f64) -> f64;
}

/// Explore iff the last estimate exceeds the `1 - delta` quantile, so the
/// long-run exploration frequency equals `delta`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Calibrated;

impl ExplorationRule for Calibrated {
    fn name(&self) -> &'static str {
        "calibrated"
    }

    fn quantile_level(&self, delta: f64) -> f64 {
        1.0 - delta
    }
}

/// Explore iff the last estimate exceeds the `delta` quantile, which makes
/// exploration less likely as `delta` grows.
#[derive(Debug, Clone, Copy, Default)]
pub struct Literal;

impl ExplorationRule for Literal {
    fn name(&self) -> &'static str {
        "literal"
    }

    fn quantile_level(&self, delta: f64) -> f64 {
        delta
    }
}

pub trait DegenerateRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    /// Search decision when fewer than two estimates are stored or they do
    /// not vary.
    fn decide(&self, last_estimate: Option<f64>, mean: f64, delta: f64, rng: &mut dyn UniformSource) -> SearchKind;
}

/// Explore with probability `delta`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bernoulli;

impl DegenerateRule for Bernoulli {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn decide(&self, _last: Option<f64>, _mean: f64, delta: f64, rng: &mut dyn UniformSource) -> SearchKind {
        if rng.uniform() < delta {
            SearchKind::Explore
        } else {
            SearchKind::Exploit
        }
    }
}

/// The normal quantile collapses onto the mean for zero dispersion, so the
/// principal explores iff the last estimate lies strictly above the mean.
/// With a single stored estimate this always means exploitation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CollapseToMean;

impl DegenerateRule for CollapseToMean {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn decide(&self, last: Option<f64>, mean: f64, _delta: f64, _rng: &mut dyn UniformSource) -> SearchKind {
        match last {
            Some(last) if last > mean => SearchKind::Explore,
            _ => SearchKind::Exploit,
        }
    }
}

pub trait SpaceRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn space(&self, previous_premium: f64, expected_theta: f64, agent: &AgentParams) -> Result<ActionSpace>;
}

/// Bounds taken at the premium that implements the highest effort, i.e.
/// every effort some linear contract can induce.
#[derive(Debug, Clone, Copy, Default)]
pub struct Widest;

impl SpaceRule for Widest {
    fn name(&self) -> &'static str {
        "widest"
    }

    fn space(&self, _previous_premium: f64, expected_theta: f64, agent: &AgentParams) -> Result<ActionSpace> {
        widest_action_space(expected_theta, agent)
    }
}

/// Bounds taken at last period's premium.
#[derive(Debug, Clone, Copy, Default)]
pub struct PreviousPremium;

impl SpaceRule for PreviousPremium {
    fn name(&self) -> &'static str {
        "previous-premium"
    }

    fn space(&self, previous_premium: f64, expected_theta: f64, agent: &AgentParams) -> Result<ActionSpace> {
        action_space(previous_premium, expected_theta, agent)
    }
}

pub trait IntervalEstimator: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;
    /// Two-sided `1 - alpha` interval for the mean of `samples`. `seed`
    /// feeds resampling estimators.
    fn interval(&self, samples: &[f64], alpha: f64, seed: u64) -> Result<(f64, f64)>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NormalApprox;

impl IntervalEstimator for NormalApprox {
    fn name(&self) -> &'static str {
        "normal"
    }

    fn interval(&self, samples: &[f64], alpha: f64, _seed: u64) -> Result<(f64, f64)> {
        confidence_interval(samples, alpha)
    }
}

/// Percentile bootstrap of the mean.
#[derive(Debug, Clone, Copy)]
pub struct Bootstrap {
    pub resamples: usize,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self { resamples: 1000 }
    }
}

impl IntervalEstimator for Bootstrap {
    fn name(&self) -> &'static str {
        "bootstrap"
    }

    fn interval(&self, samples: &[f64], alpha: f64, seed: u64) -> Result<(f64, f64)> {
        bootstrap_interval(samples, alpha, self.resamples, seed)
    }
}

/// Name-indexed collection of one strategy family.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Arc<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Register `strategy` under `name`, replacing an earlier entry.
    pub fn register(&mut self, name: &'static str, strategy: Arc<T>) -> &mut Self {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = strategy,
            None => self.entries.push((name, strategy)),
        }
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| Arc::clone(s))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_owned(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

macro_rules! builtin_registry {
    ($fn_name:ident, $trait:ident, $kind:literal, [$($strategy:expr),* $(,)?]) => {
        pub fn $fn_name() -> &'static Registry<dyn $trait> {
            static REGISTRY: OnceLock<Registry<dyn $trait>> = OnceLock::new();
            REGISTRY.get_or_init(|| {
                let mut reg = Registry::<dyn $trait>::new($kind);
                $(
                    let s: Arc<dyn $trait> = Arc::new($strategy);
                    reg.register(s.name(), s);
                )*
                reg
            })
        }
    };
}

builtin_registry!(exploration_rules, ExplorationRule, "exploration rule", [Calibrated, Literal]);
builtin_registry!(degenerate_rules, DegenerateRule, "degenerate-threshold rule", [Bernoulli, CollapseToMean]);
builtin_registry!(space_rules, SpaceRule, "action-space rule", [Widest, PreviousPremium]);
builtin_registry!(
    interval_estimators,
    IntervalEstimator,
    "interval estimator",
    [NormalApprox, Bootstrap::default()]
);
