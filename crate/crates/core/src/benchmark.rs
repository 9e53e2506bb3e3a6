//! Second-best solution of the static hidden-action model for CARA utility,
//! quadratic effort cost, normal noise and a linear sharing rule.
//!
//! Under `theta ~ N(mu, sigma)` the agent's expected utility has the closed
//! form
//!
//! ```text
//! E[U_A] = (1 - exp(-eta p (a rho + mu) + eta^2 p^2 sigma^2 / 2)) / eta - c a^2
//! ```
//!
//! which is strictly concave in effort. The principal chooses the premium;
//! the agent best-responds; participation must hold in expectation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_premium, AgentParams, EnvironmentParams};
use crate::numeric::golden_section_max;

/// Effort tolerance of the best-response search.
pub const EFFORT_TOL: f64 = 1e-8;
const PREMIUM_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 1000;
/// Slack on the participation constraint to absorb rounding.
pub const PARTICIPATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub premium_star: f64,
    pub effort_star: f64,
    /// `effort_star * rho + mu`.
    pub outcome_star: f64,
    pub principal_eu: f64,
    pub agent_eu: f64,
}

fn exponent(premium: f64, effort: f64, agent: &AgentParams, env: &EnvironmentParams) -> f64 {
    let eta = agent.eta;
    -eta * premium * (effort * agent.rho + env.mean)
        + 0.5 * eta * eta * premium * premium * env.sigma * env.sigma
}

/// Exact expectation of the agent's utility over `theta ~ N(mean, sigma)`.
pub fn expected_agent_utility(
    premium: f64,
    effort: f64,
    agent: &AgentParams,
    env: &EnvironmentParams,
) -> f64 {
    -exponent(premium, effort, agent, env).exp_m1() / agent.eta
        - agent.disutility * effort * effort
}

/// Derivative of [`expected_agent_utility`] with respect to effort.
pub fn marginal_utility_of_effort(
    premium: f64,
    effort: f64,
    agent: &AgentParams,
    env: &EnvironmentParams,
) -> f64 {
    premium * agent.rho * exponent(premium, effort, agent, env).exp()
        - 2.0 * agent.disutility * effort
}

/// An effort level beyond which the expected utility is strictly
/// decreasing. The marginal utility is itself strictly decreasing, so the
/// first doubling step where it turns negative bounds the optimum.
pub fn effort_cap(premium: f64, agent: &AgentParams, env: &EnvironmentParams) -> f64 {
    let mut cap = 1.0;
    while marginal_utility_of_effort(premium, cap, agent, env) > 0.0 && cap < 1e12 {
        cap *= 2.0;
    }
    cap
}

/// Effort maximizing the agent's expected utility under premium `premium`.
///
/// The expected utility is strictly concave in effort, so the optimum is
/// the root of the strictly decreasing first-order condition on
/// `[0, effort_cap]`, found by Newton steps safeguarded by bisection.
pub fn agent_best_response(premium: f64, agent: &AgentParams, env: &EnvironmentParams) -> f64 {
    if premium <= 0.0 {
        return 0.0;
    }
    let cap = effort_cap(premium, agent, env);
    solve_decreasing(0.0, cap, |a| {
        let slope = premium * agent.rho * exponent(premium, a, agent, env).exp();
        let g = slope - 2.0 * agent.disutility * a;
        let dg = -agent.eta * premium * agent.rho * slope - 2.0 * agent.disutility;
        (g, dg)
    })
}

/// Root of a strictly decreasing `g` with `g(lo) > 0 >= g(hi)`; `f`
/// returns `(g, g')`.
fn solve_decreasing<F>(mut lo: f64, mut hi: f64, mut f: F) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, dg) = f(x);
        if g == 0.0 {
            break;
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / dg;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let converged = (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
        x = next;
        if converged || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    x
}

fn principal_objective(
    premium: f64,
    agent: &AgentParams,
    env: &EnvironmentParams,
) -> (f64, f64, f64) {
    let effort = agent_best_response(premium, agent, env);
    let agent_eu = expected_agent_utility(premium, effort, agent, env);
    let value = if agent_eu >= agent.reservation_utility - PARTICIPATION_SLACK {
        (1.0 - premium) * (effort * agent.rho + env.mean)
    } else {
        f64::NEG_INFINITY
    };
    (value, effort, agent_eu)
}

fn benchmark_at(premium: f64, agent: &AgentParams, env: &EnvironmentParams) -> Benchmark {
    let (principal_eu, effort, agent_eu) = principal_objective(premium, agent, env);
    Benchmark {
        premium_star: premium,
        effort_star: effort,
        outcome_star: effort * agent.rho + env.mean,
        principal_eu,
        agent_eu,
    }
}

/// Premium maximizing the principal's expected utility subject to the
/// agent's participation and incentive compatibility.
///
/// A scan over 1000 equally spaced premiums guards against multiple local
/// optima; golden-section search then refines the best scan cell.
pub fn solve_second_best(agent: &AgentParams, env: &EnvironmentParams) -> Result<Benchmark> {
    agent.validate()?;
    let step = 1.0 / SCAN_POINTS as f64;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=SCAN_POINTS {
        let p = i as f64 * step;
        let (value, _, _) = principal_objective(p, agent, env);
        if value.is_finite() && best.is_none_or(|(_, v)| value > v) {
            best = Some((i, value));
        }
    }
    let (i, scan_value) = best.ok_or(Error::Infeasible)?;
    let lo = (i.saturating_sub(1)) as f64 * step;
    let hi = ((i + 1).min(SCAN_POINTS)) as f64 * step;
    let refined = golden_section_max(
        |p| principal_objective(p, agent, env).0,
        lo,
        hi,
        PREMIUM_TOL,
    );
    let premium = if refined.value >= scan_value {
        refined.x
    } else {
        i as f64 * step
    };
    Ok(benchmark_at(premium, agent, env))
}

/// Exhaustive grid maximization of the same program. Test oracle: shares
/// nothing with [`solve_second_best`] beyond the closed-form expectation.
pub fn brute_force_oracle(
    agent: &AgentParams,
    env: &EnvironmentParams,
    p_step: f64,
    a_step: f64,
) -> Result<Benchmark> {
    if !(p_step > 0.0 && a_step > 0.0) {
        return Err(Error::Domain("grid steps must be positive".into()));
    }
    let p_count = (1.0 / p_step).round() as usize;
    let mut best: Option<Benchmark> = None;
    for i in 0..=p_count {
        let p = (i as f64 * p_step).min(1.0);
        let cap = effort_cap(p, agent, env);
        let a_count = (cap / a_step).ceil() as usize;
        let (mut a_best, mut u_best) = (0.0, f64::NEG_INFINITY);
        for j in 0..=a_count {
            let a = j as f64 * a_step;
            let u = expected_agent_utility(p, a, agent, env);
            if u > u_best {
                a_best = a;
                u_best = u;
            }
        }
        if u_best < agent.reservation_utility - PARTICIPATION_SLACK {
            continue;
        }
        let value = (1.0 - p) * (a_best * agent.rho + env.mean);
        if best.is_none_or(|b| value > b.principal_eu) {
            best = Some(Benchmark {
                premium_star: p,
                effort_star: a_best,
                outcome_star: a_best * agent.rho + env.mean,
                principal_eu: value,
                agent_eu: u_best,
            });
        }
    }
    best.ok_or(Error::Infeasible)
}

/// Standard deviation `multiplier * x*` where `x*` is the second-best
/// outcome of the noise-free model.
pub fn turbulence_sigma(agent: &AgentParams, mean: f64, multiplier: f64) -> Result<f64> {
    if !(multiplier >= 0.0) {
        return Err(Error::Domain(format!("sigma multiplier must be >= 0, got {multiplier}")));
    }
    let x_star = solve_second_best(agent, &EnvironmentParams::deterministic(mean))?.outcome_star;
    Ok(multiplier * x_star)
}

/// Validate a premium and evaluate the best response, for callers that
/// take premiums from outside.
pub fn checked_best_response(
    premium: f64,
    agent: &AgentParams,
    env: &EnvironmentParams,
) -> Result<f64> {
    check_premium(premium)?;
    Ok(agent_best_response(premium, agent, env))
}
