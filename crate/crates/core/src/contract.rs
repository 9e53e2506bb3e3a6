//! Contracting: the premium that implements a desired effort, the agent's
//! acceptance decision and his effort choice.

use serde::Serialize;

use crate::benchmark::{agent_best_response, marginal_utility_of_effort};
use crate::error::{Error, Result};
use crate::model::{point_agent_utility, AgentParams, Contract, EnvironmentParams};
use crate::numeric::bisect_threshold;
use crate::search::{max_implementable, ActionSpace};

const PREMIUM_TOL: f64 = 1e-12;
/// Best responses within this distance of the desired effort count as
/// implementing it.
const IMPLEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Offer {
    pub contract: Contract,
    pub desired_effort: f64,
    pub principal_expected_theta: f64,
}

/// Smallest premium that makes `desired_effort` incentive compatible and
/// acceptable under the point expectation `expected_theta`.
///
/// The principal's utility `(1 - p) * x` falls in `p`, so the smallest
/// implementing premium is her constrained optimum.
pub fn optimal_premium(desired_effort: f64, expected_theta: f64, agent: &AgentParams) -> Result<f64> {
    if !(desired_effort >= 0.0) {
        return Err(Error::Domain(format!("desired effort must be >= 0, got {desired_effort}")));
    }
    let env = EnvironmentParams::deterministic(expected_theta);
    let target = desired_effort - IMPLEMENT_TOL;
    // Concave utility: the best response reaches `target` iff the marginal
    // utility at `target` is non-negative.
    let induces = |p: f64| marginal_utility_of_effort(p, target, agent, &env) >= 0.0;
    let unimplementable = Error::Unimplementable {
        effort: desired_effort,
    };

    let peak = max_implementable(expected_theta, agent);
    let p_ic = if induces(0.0) {
        0.0
    } else if !induces(peak.premium) {
        return Err(unimplementable);
    } else {
        bisect_threshold(induces, 0.0, peak.premium, PREMIUM_TOL)
    };

    let reservation = agent.reservation_utility;
    let utility = |p: f64| point_agent_utility(p, desired_effort, expected_theta, agent);
    if utility(p_ic) >= reservation {
        return Ok(p_ic);
    }
    // Raising the premium helps participation only with a positive
    // expected outcome, and only while it still induces the effort.
    if desired_effort * agent.rho + expected_theta <= 0.0 {
        return Err(unimplementable);
    }
    let p_max = if induces(1.0) {
        1.0
    } else {
        // Last premium on the falling branch that still induces the effort.
        let falls_short = |p: f64| !induces(p);
        let first_short = bisect_threshold(falls_short, peak.premium.max(p_ic), 1.0, PREMIUM_TOL);
        (first_short - PREMIUM_TOL).max(p_ic)
    };
    if utility(p_max) < reservation || !induces(p_max) {
        return Err(unimplementable);
    }
    Ok(bisect_threshold(|p| utility(p) >= reservation, p_ic, p_max, PREMIUM_TOL))
}

/// Build the offer for `desired_effort`, or the closest lower effort that
/// can still be implemented when it cannot.
pub fn make_offer(
    desired_effort: f64,
    expected_theta: f64,
    space: &ActionSpace,
    agent: &AgentParams,
) -> Result<(Offer, bool)> {
    let (effort, premium, fell_back) = match optimal_premium(desired_effort, expected_theta, agent) {
        Ok(p) => (desired_effort, p, false),
        Err(Error::Unimplementable { .. }) => {
            let effort = largest_implementable(space.lower, desired_effort, expected_theta, agent)
                .ok_or(Error::Unimplementable {
                    effort: desired_effort,
                })?;
            (effort, optimal_premium(effort, expected_theta, agent)?, true)
        }
        Err(e) => return Err(e),
    };
    Ok((
        Offer {
            contract: Contract::new(premium)?,
            desired_effort: effort,
            principal_expected_theta: expected_theta,
        },
        fell_back,
    ))
}

/// Largest effort in `[lower, upto]` that some premium implements.
pub fn largest_implementable(lower: f64, upto: f64, expected_theta: f64, agent: &AgentParams) -> Option<f64> {
    let ok = |a: f64| optimal_premium(a, expected_theta, agent).is_ok();
    if !ok(lower) {
        return None;
    }
    if ok(upto) {
        return Some(upto);
    }
    // Feasible at `lower`, infeasible at `upto`: bisect on the failure
    // boundary and step back to the feasible side.
    let first_bad = bisect_threshold(|a| !ok(a), lower, upto, 1e-10);
    let mut a = (first_bad - 1e-10).max(lower);
    while !ok(a) && a > lower {
        a = (a - 1e-9).max(lower);
    }
    Some(a)
}

/// Effort the agent exerts under `premium` given his own expectation,
/// restricted to the action space.
pub fn agent_effort(premium: f64, agent_expected_theta: f64, space: &ActionSpace, agent: &AgentParams) -> f64 {
    let env = EnvironmentParams::deterministic(agent_expected_theta);
    // Concave objective: the constrained optimum is the clamped
    // unconstrained one.
    space.clamp(agent_best_response(premium, agent, &env))
}

/// The agent accepts iff his best attainable utility under the offer
/// reaches the reservation utility. With `offer_only` he evaluates only the
/// effort the principal based the contract on.
pub fn accept_contract(
    offer: &Offer,
    agent_expected_theta: f64,
    agent: &AgentParams,
    space: &ActionSpace,
    offer_only: bool,
) -> bool {
    let p = offer.contract.premium();
    let effort = if offer_only {
        offer.desired_effort
    } else {
        agent_effort(p, agent_expected_theta, space, agent)
    };
    point_agent_utility(p, effort, agent_expected_theta, agent) >= agent.reservation_utility
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::solve_second_best;
    use crate::search::widest_action_space;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn agent() -> AgentParams {
        AgentParams::default()
    }

    fn offer(premium: f64, desired: f64) -> Offer {
        Offer {
            contract: Contract::new(premium).unwrap(),
            desired_effort: desired,
            principal_expected_theta: 0.0,
        }
    }

    #[test]
    fn nothing_to_implement() {
        assert_eq!(optimal_premium(0.0, 0.0, &agent()).unwrap(), 0.0);
        assert!(optimal_premium(-1.0, 0.0, &agent()).is_err());
    }

    #[test]
    fn reproduces_benchmark_premium_without_noise() {
        let a = agent();
        let b = solve_second_best(&a, &EnvironmentParams::deterministic(0.0)).unwrap();
        let p = optimal_premium(b.effort_star, 0.0, &a).unwrap();
        assert_abs_diff_eq!(p, b.premium_star, epsilon = 1e-3);
    }

    #[test]
    fn beyond_peak_is_unimplementable() {
        let a = agent();
        let peak = max_implementable(0.0, &a);
        assert!(matches!(
            optimal_premium(peak.effort + 0.01, 0.0, &a),
            Err(Error::Unimplementable { .. })
        ));
    }

    #[test]
    fn binding_participation_raises_premium() {
        let a = AgentParams {
            reservation_utility: 1.0,
            ..agent()
        };
        let p = optimal_premium(1.0, 0.0, &a).unwrap();
        let ic_only = optimal_premium(1.0, 0.0, &agent()).unwrap();
        assert!(p > ic_only);
        assert_abs_diff_eq!(point_agent_utility(p, 1.0, 0.0, &a), 1.0, epsilon = 1e-9);
        let env = EnvironmentParams::deterministic(0.0);
        assert!(agent_best_response(p, &a, &env) >= 1.0 - 1e-9);
    }

    #[test]
    fn fallback_offer_uses_largest_implementable_effort() {
        let a = agent();
        let space = widest_action_space(0.0, &a).unwrap();
        let (o, fell_back) = make_offer(space.upper + 0.5, 0.0, &space, &a).unwrap();
        assert!(fell_back);
        assert!(o.desired_effort <= space.upper + 1e-9);
        assert!(o.desired_effort > space.upper - 1e-6);
    }

    #[test]
    fn acceptance_examples() {
        let space = ActionSpace::new(0.0, 2.0);
        assert!(accept_contract(&offer(0.0, 0.0), 0.0, &agent(), &space, false));
        let picky = AgentParams {
            reservation_utility: 0.1,
            ..agent()
        };
        assert!(!accept_contract(&offer(0.0, 0.0), 0.0, &picky, &space, false));
    }

    #[test]
    fn zero_premium_effort_is_lower_bound() {
        let space = ActionSpace::new(0.3, 2.0);
        assert_eq!(agent_effort(0.0, 0.0, &space, &agent()), 0.3);
    }

    #[test]
    fn effort_solves_first_order_condition() {
        let a = agent();
        let space = ActionSpace::new(0.0, 50.0);
        for &(p, e) in &[(0.01, 0.0), (0.03, 4.0), (0.2, -3.0)] {
            let eff = agent_effort(p, e, &space, &a);
            let foc = p * a.rho * (-a.eta * p * (eff * a.rho + e)).exp() - 0.2 * eff;
            assert!(foc.abs() < 1e-6, "p={p} E={e} foc={foc}");
        }
    }

    #[test]
    fn equal_expectations_realize_desired_effort() {
        let a = agent();
        for e in [-8.0, 0.0, 6.0] {
            let space = widest_action_space(e, &a).unwrap();
            for k in 1..10 {
                let desired = space.lower + space.width() * k as f64 / 10.0;
                let (o, _) = make_offer(desired, e, &space, &a).unwrap();
                assert!(accept_contract(&o, e, &a, &space, false));
                let eff = agent_effort(o.contract.premium(), e, &space, &a);
                assert!((eff - desired).abs() < 1e-4, "E={e} desired={desired} eff={eff}");
            }
        }
    }

    proptest! {
        #[test]
        fn premium_induces_the_desired_effort(frac in 0.0..1.0f64, e in -10.0..10.0f64) {
            let a = agent();
            let space = widest_action_space(e, &a).unwrap();
            let desired = space.lower + frac * space.width();
            let p = optimal_premium(desired, e, &a).unwrap();
            let env = EnvironmentParams::deterministic(e);
            prop_assert!(agent_best_response(p, &a, &env) >= desired - 1e-6);
        }

        #[test]
        fn premium_non_decreasing_in_effort(f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
            let a = agent();
            let space = widest_action_space(0.0, &a).unwrap();
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            let p_lo = optimal_premium(space.upper * lo, 0.0, &a).unwrap();
            let p_hi = optimal_premium(space.upper * hi, 0.0, &a).unwrap();
            prop_assert!(p_hi >= p_lo - 1e-9);
        }

        #[test]
        fn acceptance_monotone_in_premium(p in 0.0..0.5f64, dp in 0.0..0.5f64, e in -5.0..5.0f64) {
            let a = AgentParams { reservation_utility: 0.3, ..agent() };
            let space = ActionSpace::new(0.0, 50.0);
            if accept_contract(&offer(p, 0.0), e, &a, &space, false) {
                prop_assert!(accept_contract(&offer(p + dp, 0.0), e, &a, &space, false));
            }
        }
    }
}
