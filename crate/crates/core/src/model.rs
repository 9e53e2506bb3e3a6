//! Economic primitives of the hidden-action model: parameters, production,
//! the linear sharing rule and both parties' utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient `c` of the agent's effort disutility `c * a^2`.
pub const DISUTILITY_COEFFICIENT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentParams {
    /// Arrow-Pratt coefficient of absolute risk aversion.
    pub eta: f64,
    /// Output per unit of effort.
    pub rho: f64,
    pub reservation_utility: f64,
    pub disutility: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            rho: 50.0,
            reservation_utility: 0.0,
            disutility: DISUTILITY_COEFFICIENT,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.disutility > 0.0 && self.disutility.is_finite()) {
            return Err(Error::Domain(format!(
                "disutility must be > 0, got {}",
                self.disutility
            )));
        }
        if !self.reservation_utility.is_finite() {
            return Err(Error::Domain("reservation_utility must be finite".into()));
        }
        Ok(())
    }

    /// Upper bound on any agent utility: `1 / eta`.
    pub fn utility_bound(&self) -> f64 {
        1.0 / self.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalParams {
    /// Exploration propensity.
    pub delta: f64,
}

impl PrincipalParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!("delta must lie in [0, 1], got {delta}")));
        }
        Ok(Self { delta })
    }
}

/// Distribution of the exogenous factor, `theta ~ N(mean, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    pub mean: f64,
    pub sigma: f64,
}

impl Default for EnvironmentParams {
    fn default() -> Self {
        Self {
            mean: 0.0,
            sigma: 0.0,
        }
    }
}

impl EnvironmentParams {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) || !mean.is_finite() {
            return Err(Error::Domain(format!(
                "environment needs finite mean and sigma >= 0, got N({mean}, {sigma})"
            )));
        }
        Ok(Self { mean, sigma })
    }

    pub fn deterministic(mean: f64) -> Self {
        Self { mean, sigma: 0.0 }
    }
}

/// Linear sharing rule `s(x) = premium * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    premium: f64,
}

impl Contract {
    pub fn new(premium: f64) -> Result<Self> {
        check_premium(premium)?;
        Ok(Self { premium })
    }

    pub fn premium(&self) -> f64 {
        self.premium
    }

    pub fn share(&self, x: f64) -> f64 {
        x * self.premium
    }
}

pub(crate) fn check_premium(premium: f64) -> Result<()> {
    if (0.0..=1.0).contains(&premium) {
        Ok(())
    } else {
        Err(Error::Domain(format!("premium must lie in [0, 1], got {premium}")))
    }
}

/// Production function `x = effort * rho + theta`.
pub fn outcome(effort: f64, rho: f64, theta: f64) -> f64 {
    debug_assert!(effort >= 0.0);
    effort * rho + theta
}

/// Agent's share of the outcome. Negative outcomes are shared as well.
pub fn compensation(x: f64, premium: f64) -> Result<f64> {
    check_premium(premium)?;
    Ok(x * premium)
}

/// Risk-neutral principal: utility equals the retained outcome.
pub fn principal_utility(x: f64, s: f64) -> f64 {
    x - s
}

/// CARA utility of compensation minus quadratic effort disutility,
/// `(1 - exp(-eta * s)) / eta - c * a^2` with `c` = [`DISUTILITY_COEFFICIENT`].
pub fn agent_utility(s: f64, effort: f64, eta: f64) -> f64 {
    agent_utility_with(s, effort, eta, DISUTILITY_COEFFICIENT)
}

pub fn agent_utility_with(s: f64, effort: f64, eta: f64, disutility: f64) -> f64 {
    -(-eta * s).exp_m1() / eta - disutility * effort * effort
}

/// Agent utility under a point expectation of the exogenous factor: the
/// agent (or the principal reasoning about him) plugs `expected_theta` into
/// the production function.
pub fn point_agent_utility(premium: f64, effort: f64, expected_theta: f64, agent: &AgentParams) -> f64 {
    let s = premium * outcome(effort, agent.rho, expected_theta);
    agent_utility_with(s, effort, agent.eta, agent.disutility)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn outcome_examples() {
        assert_eq!(outcome(1.0, 50.0, 0.0), 50.0);
        assert_eq!(outcome(0.0, 50.0, 3.2), 3.2);
        assert_eq!(outcome(2.0, 50.0, -5.0), 95.0);
    }

    #[test]
    fn compensation_examples() {
        assert_eq!(compensation(100.0, 0.2).unwrap(), 20.0);
        assert_eq!(compensation(100.0, 0.0).unwrap(), 0.0);
        assert_eq!(compensation(-10.0, 0.5).unwrap(), -5.0);
    }

    #[test]
    fn compensation_rejects_bad_premium() {
        assert!(matches!(compensation(1.0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(compensation(1.0, -0.01), Err(Error::Domain(_))));
        assert!(Contract::new(f64::NAN).is_err());
    }

    #[test]
    fn principal_utility_examples() {
        assert_eq!(principal_utility(100.0, 20.0), 80.0);
        assert_eq!(principal_utility(0.0, 0.0), 0.0);
        assert_eq!(principal_utility(50.0, 50.0), 0.0);
    }

    #[test]
    fn agent_utility_examples() {
        assert_eq!(agent_utility(0.0, 0.0, 0.5), 0.0);
        let expected = 2.0 * (1.0 - (-2.5f64).exp()) - 0.1;
        assert_abs_diff_eq!(agent_utility(5.0, 1.0, 0.5), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(agent_utility(5.0, 1.0, 0.5), 1.73583, epsilon = 1e-5);
        assert_abs_diff_eq!(agent_utility(1e6, 0.0, 0.5), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(AgentParams::default().validate().is_ok());
        let bad = AgentParams { eta: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(PrincipalParams::new(1.2).is_err());
        assert!(EnvironmentParams::new(0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn agent_utility_monotone(s in -10.0..10.0f64, a in 0.0..10.0f64, eta in 0.05..2.0f64) {
            let h = 1e-4;
            prop_assert!(agent_utility(s + h, a, eta) > agent_utility(s, a, eta));
            prop_assert!(agent_utility(s, a + h, eta) < agent_utility(s, a, eta));
        }

        #[test]
        fn agent_utility_below_cara_bound(s in -50.0..30.0f64, a in 0.0..10.0f64, eta in 0.05..1.0f64) {
            prop_assert!(agent_utility(s, a, eta) < 1.0 / eta);
        }

        #[test]
        fn principal_keeps_complement(x in -1e3..1e3f64, p in 0.0..=1.0f64) {
            let s = compensation(x, p).unwrap();
            let lhs = principal_utility(x, s);
            let rhs = x * (1.0 - p);
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
    }
}
