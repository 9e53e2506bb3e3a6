//! The principal's search for effort candidates: exploration threshold,
//! endogenous action space, exploitation/exploration spaces, candidate
//! sampling and selection.

use rand::Rng;
use serde::Serialize;

use crate::benchmark::agent_best_response;
use crate::error::{Error, Result};
use crate::model::{point_agent_utility, AgentParams, EnvironmentParams};
use crate::numeric::{bisect_threshold, normal_quantile};
use crate::strategy::{DegenerateRule, ExplorationRule};

/// Slack when testing whether an effort lies inside a space.
pub const SPACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - SPACE_TOL && x <= self.hi + SPACE_TOL
    }
}

/// Feasible efforts: participation bounds from below, incentive
/// compatibility from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionSpace {
    pub lower: f64,
    pub upper: f64,
}

impl ActionSpace {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(0.0 <= lower && lower <= upper && upper.is_finite());
        Self { lower, upper }
    }

    pub fn point(effort: f64) -> Self {
        Self::new(effort, effort)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, effort: f64) -> bool {
        self.as_interval().contains(effort)
    }

    pub fn clamp(&self, effort: f64) -> f64 {
        effort.clamp(self.lower, self.upper)
    }

    pub fn as_interval(&self) -> Interval {
        Interval::new(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchKind {
    Exploit,
    Explore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpace {
    pub kind: SearchKind,
    pub intervals: Vec<Interval>,
}

impl SearchSpace {
    pub fn total_len(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }
}

/// Outcome of the threshold computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Value(f64),
    /// Zero or undefined dispersion of the estimates.
    Degenerate,
}

/// Quantile at level `level` of the normal distribution fitted to the
/// estimates (sample mean, sample standard deviation).
pub fn exploration_threshold(estimates: &[f64], level: f64) -> Result<Threshold> {
    if estimates.is_empty() {
        return Err(Error::Domain("exploration threshold needs at least one estimate".into()));
    }
    let n = estimates.len();
    let mean = estimates.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (estimates.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    threshold_from_moments(mean, std, level)
}

pub fn threshold_from_moments(mean: f64, std: f64, level: f64) -> Result<Threshold> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level must lie strictly inside (0, 1), got {level}"
        )));
    }
    if !(std > 0.0) {
        return Ok(Threshold::Degenerate);
    }
    Ok(Threshold::Value(normal_quantile(level, mean, std)))
}

/// Inputs of the local/global search decision.
#[derive(Debug, Clone, Copy)]
pub struct StrategyInputs {
    /// Most recent estimate of the exogenous factor, if any.
    pub last_estimate: Option<f64>,
    pub mean: f64,
    /// Sample standard deviation of the estimate window, if defined.
    pub std: Option<f64>,
    pub delta: f64,
    pub status_quo_feasible: bool,
}

/// Decide between local and global search.
///
/// An infeasible status quo forces global search. With a usable threshold
/// the principal explores iff the last estimate exceeds the quantile chosen
/// by `rule`; without one (fewer than two estimates or zero dispersion)
/// `degenerate` decides.
pub fn choose_strategy<R: Rng + ?Sized>(
    inputs: &StrategyInputs,
    rule: &dyn ExplorationRule,
    degenerate: &dyn DegenerateRule,
    rng: &mut R,
) -> SearchKind {
    if !inputs.status_quo_feasible {
        return SearchKind::Explore;
    }
    let delta = inputs.delta;
    if delta <= 0.0 {
        return SearchKind::Exploit;
    }
    if delta >= 1.0 {
        return SearchKind::Explore;
    }
    let threshold = match (inputs.last_estimate, inputs.std) {
        (Some(last), Some(std)) => threshold_from_moments(inputs.mean, std, rule.quantile_level(delta))
            .map(|t| (last, t))
            .ok(),
        _ => None,
    };
    match threshold {
        Some((last, Threshold::Value(kappa))) => {
            if last > kappa {
                SearchKind::Explore
            } else {
                SearchKind::Exploit
            }
        }
        _ => degenerate.decide(inputs.last_estimate, inputs.mean, delta, &mut RngDraw(rng)),
    }
}

/// Object-safe uniform source handed to [`DegenerateRule`]s.
pub struct RngDraw<'a, R: Rng + ?Sized>(pub &'a mut R);

pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

impl<R: Rng + ?Sized> UniformSource for RngDraw<'_, R> {
    fn uniform(&mut self) -> f64 {
        self.0.random()
    }
}

/// Action space implied by contracting at `premium` under the point
/// expectation `expected_theta`.
///
/// The upper bound is the agent's own optimum at that premium; the lower
/// bound is the smallest effort meeting the reservation utility.
pub fn action_space(premium: f64, expected_theta: f64, agent: &AgentParams) -> Result<ActionSpace> {
    crate::model::check_premium(premium)?;
    let env = EnvironmentParams::deterministic(expected_theta);
    let upper = agent_best_response(premium, agent, &env);
    let reservation = agent.reservation_utility;
    let utility = |a: f64| point_agent_utility(premium, a, expected_theta, agent);
    if utility(upper) < reservation {
        return Err(Error::EmptyActionSpace);
    }
    if utility(0.0) >= reservation {
        return Ok(ActionSpace::new(0.0, upper));
    }
    // Concave utility: increasing on [0, upper], so the participation
    // boundary is a single crossing.
    let lower = bisect_threshold(|a| utility(a) >= reservation, 0.0, upper, 1e-12);
    Ok(ActionSpace::new(lower.min(upper), upper))
}

/// The highest effort any premium in `[0, 1]` induces under a point
/// expectation, with the premium that induces it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Implementable {
    pub premium: f64,
    pub effort: f64,
}

/// Maximize the agent's best response over the premium.
///
/// Differentiating the first-order condition `p rho exp(-eta p k) = 2 c a`
/// (with `k = a rho + E`) at fixed effort gives the peak premium
/// `p = 1 / (eta k)`, and substituting back `a k = rho / (2 c eta e)`, a
/// quadratic in `a`. When that premium exceeds 1 the best response still
/// rises on `[0, 1]` and the peak sits at `p = 1`.
pub fn max_implementable(expected_theta: f64, agent: &AgentParams) -> Implementable {
    let (rho, e) = (agent.rho, expected_theta);
    let k = rho / (2.0 * agent.disutility * agent.eta * std::f64::consts::E);
    let effort = 2.0 * k / (e + (e * e + 4.0 * rho * k).sqrt());
    let premium = 1.0 / (agent.eta * (effort * rho + e));
    if premium <= 1.0 {
        return Implementable { premium, effort };
    }
    let env = EnvironmentParams::deterministic(expected_theta);
    Implementable {
        premium: 1.0,
        effort: agent_best_response(1.0, agent, &env),
    }
}

/// Action space at the premium inducing the highest effort.
pub fn widest_action_space(expected_theta: f64, agent: &AgentParams) -> Result<ActionSpace> {
    let peak = max_implementable(expected_theta, agent);
    action_space(peak.premium, expected_theta, agent)
}

/// The `1/q` share of the action space around the status quo, shifted
/// inward at the boundaries so its width is preserved.
pub fn exploitation_window(space: &ActionSpace, q: u32, status_quo: f64) -> Result<Interval> {
    if q == 0 {
        return Err(Error::Domain("window divisor q must be >= 1".into()));
    }
    if !space.contains(status_quo) {
        return Err(Error::StatusQuoOutside {
            status_quo,
            lower: space.lower,
            upper: space.upper,
        });
    }
    let width = space.width() / q as f64;
    let center = space.clamp(status_quo);
    let mut lo = center - 0.5 * width;
    let mut hi = center + 0.5 * width;
    if lo < space.lower {
        lo = space.lower;
        hi = (space.lower + width).min(space.upper);
    } else if hi > space.upper {
        hi = space.upper;
        lo = (space.upper - width).max(space.lower);
    }
    Ok(Interval::new(lo, hi))
}

/// The action space minus the exploitation window; zero-width pieces are
/// dropped.
pub fn exploration_intervals(space: &ActionSpace, window: &Interval) -> Vec<Interval> {
    let mut out = Vec::with_capacity(2);
    if window.lo > space.lower {
        out.push(Interval::new(space.lower, window.lo));
    }
    if window.hi < space.upper {
        out.push(Interval::new(window.hi, space.upper));
    }
    out
}

/// Build the search space for `kind`.
///
/// Without a feasible status quo there is no window and the whole action
/// space is explored. When the window covers the whole space (q = 1) the
/// exploration space is empty and the search falls back to the window.
pub fn search_space(
    kind: SearchKind,
    space: &ActionSpace,
    q: u32,
    status_quo: Option<f64>,
) -> Result<SearchSpace> {
    let Some(sq) = status_quo.filter(|&s| space.contains(s)) else {
        return Ok(SearchSpace {
            kind: SearchKind::Explore,
            intervals: vec![space.as_interval()],
        });
    };
    let window = exploitation_window(space, q, sq)?;
    let intervals = match kind {
        SearchKind::Exploit => vec![window],
        SearchKind::Explore => {
            let rest = exploration_intervals(space, &window);
            if rest.iter().map(Interval::len).sum::<f64>() > 0.0 {
                rest
            } else {
                vec![window]
            }
        }
    };
    Ok(SearchSpace { kind, intervals })
}

/// Two independent uniform draws over the union of the search intervals.
pub fn sample_candidates<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> [f64; 2] {
    [sample_uniform(space, rng), sample_uniform(space, rng)]
}

fn sample_uniform<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> f64 {
    let first = space.intervals.first().expect("search space has no intervals");
    let total = space.total_len();
    let u: f64 = rng.random();
    if !(total > 0.0) {
        return first.lo;
    }
    let mut offset = u * total;
    for iv in &space.intervals {
        if offset < iv.len() {
            return iv.lo + offset;
        }
        offset -= iv.len();
    }
    // u * total rounded up to the total length.
    space.intervals.last().map_or(first.lo, |iv| iv.hi)
}

/// Highest discovered effort; a feasible status quo competes with the
/// candidates unless `status_quo_competes` is off.
pub fn select_effort(candidates: [f64; 2], status_quo: Option<f64>, status_quo_competes: bool) -> f64 {
    let best = candidates[0].max(candidates[1]);
    match status_quo {
        Some(sq) if status_quo_competes => best.max(sq),
        _ => best,
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::solve_second_best;
    use crate::strategy::{Bernoulli, Calibrated, Literal};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent() -> AgentParams {
        AgentParams::default()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(
            exploration_threshold(&[1.0, 2.0, 3.0], 0.5).unwrap(),
            Threshold::Value(2.0)
        );
        assert_eq!(
            exploration_threshold(&[0.0, 0.0, 0.0], 0.3).unwrap(),
            Threshold::Degenerate
        );
        // mean 0, sample std sqrt(2); z_0.75 = 0.67449 from tables.
        let Threshold::Value(k) = exploration_threshold(&[-1.0, 1.0], 0.75).unwrap() else {
            panic!("degenerate");
        };
        assert_abs_diff_eq!(k, 0.67449 * 2f64.sqrt(), epsilon = 1e-5);
        assert!(exploration_threshold(&[1.0, 2.0], 0.0).is_err());
        assert!(exploration_threshold(&[1.0, 2.0], 1.0).is_err());
        assert!(exploration_threshold(&[], 0.5).is_err());
    }

    #[test]
    fn infeasible_status_quo_forces_exploration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for delta in [0.0, 0.25, 0.9] {
            let inputs = StrategyInputs {
                last_estimate: Some(-10.0),
                mean: 0.0,
                std: Some(1.0),
                delta,
                status_quo_feasible: false,
            };
            assert_eq!(choose_strategy(&inputs, &Calibrated, &Bernoulli, &mut rng), SearchKind::Explore);
        }
    }

    #[test]
    fn degenerate_dispersion_with_zero_delta_always_exploits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = StrategyInputs {
            last_estimate: Some(0.0),
            mean: 0.0,
            std: Some(0.0),
            delta: 0.0,
            status_quo_feasible: true,
        };
        for _ in 0..1000 {
            assert_eq!(choose_strategy(&inputs, &Calibrated, &Bernoulli, &mut rng), SearchKind::Exploit);
        }
    }

    #[test]
    fn degenerate_dispersion_explores_with_probability_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = StrategyInputs {
            last_estimate: Some(1.0),
            mean: 1.0,
            std: None,
            delta: 0.3,
            status_quo_feasible: true,
        };
        let n = 100_000;
        let explored = (0..n)
            .filter(|_| choose_strategy(&inputs, &Calibrated, &Bernoulli, &mut rng) == SearchKind::Explore)
            .count();
        assert_abs_diff_eq!(explored as f64 / n as f64, 0.3, epsilon = 0.01);
    }

    #[test]
    fn modes_differ_in_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // last estimate at the 70% point of N(0, 1).
        let inputs = StrategyInputs {
            last_estimate: Some(0.5244),
            mean: 0.0,
            std: Some(1.0),
            delta: 0.25,
            status_quo_feasible: true,
        };
        assert_eq!(choose_strategy(&inputs, &Calibrated, &Bernoulli, &mut rng), SearchKind::Exploit);
        assert_eq!(choose_strategy(&inputs, &Literal, &Bernoulli, &mut rng), SearchKind::Explore);
    }

    #[test]
    fn zero_premium_gives_point_space() {
        let s = action_space(0.0, 0.0, &agent()).unwrap();
        assert_eq!(s, ActionSpace::new(0.0, 0.0));
    }

    #[test]
    fn participation_bound_solves_reservation_equation() {
        let a = agent();
        let s = action_space(0.05, -10.0, &a).unwrap();
        assert!(s.lower > 0.0);
        let u = point_agent_utility(0.05, s.lower, -10.0, &a);
        assert!(u.abs() < 1e-8, "U(lower) = {u}");
    }

    #[test]
    fn empty_space_reported() {
        let a = AgentParams {
            reservation_utility: 1.9,
            ..agent()
        };
        assert!(matches!(action_space(0.02, 0.0, &a), Err(Error::EmptyActionSpace)));
    }

    #[test]
    fn space_at_benchmark_premium_brackets_benchmark_effort() {
        let a = agent();
        let b = solve_second_best(&a, &EnvironmentParams::deterministic(0.0)).unwrap();
        let s = action_space(b.premium_star, 0.0, &a).unwrap();
        assert!(s.lower <= b.effort_star + 1e-9 && b.effort_star <= s.upper + 1e-9);
        let w = widest_action_space(0.0, &a).unwrap();
        assert!(w.lower <= b.effort_star && b.effort_star <= w.upper);
    }

    // Oracle: golden-section over the premium of the numerically solved
    // best response.
    #[test]
    fn max_implementable_matches_direct_maximization() {
        let a = agent();
        for e in [-120.0, -20.0, -5.0, 0.0, 5.0, 30.0, 150.0] {
            let env = EnvironmentParams::deterministic(e);
            let direct = crate::numeric::golden_section_max(
                |p| agent_best_response(p, &a, &env),
                0.0,
                1.0,
                1e-12,
            );
            let peak = max_implementable(e, &a);
            assert_abs_diff_eq!(peak.effort, direct.value, epsilon = 1e-9);
            assert_abs_diff_eq!(peak.premium, direct.x, epsilon = 1e-4);
            assert_abs_diff_eq!(agent_best_response(peak.premium, &a, &env), peak.effort, epsilon = 1e-9);
        }
    }

    #[test]
    fn window_examples() {
        let s = ActionSpace::new(0.0, 10.0);
        let w = exploitation_window(&s, 10, 5.0).unwrap();
        assert_abs_diff_eq!(w.lo, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w.hi, 5.5, epsilon = 1e-12);
        assert_eq!(exploitation_window(&s, 10, 0.1).unwrap(), Interval::new(0.0, 1.0));
        assert_eq!(exploitation_window(&s, 1, 3.0).unwrap(), Interval::new(0.0, 10.0));
        assert!(matches!(
            exploitation_window(&s, 3, 11.0),
            Err(Error::StatusQuoOutside { .. })
        ));
    }

    #[test]
    fn explore_falls_back_to_window_when_it_covers_everything() {
        let s = ActionSpace::new(0.0, 2.0);
        let sp = search_space(SearchKind::Explore, &s, 1, Some(1.0)).unwrap();
        assert_eq!(sp.intervals, vec![Interval::new(0.0, 2.0)]);
        let sp = search_space(SearchKind::Exploit, &s, 4, None).unwrap();
        assert_eq!(sp.kind, SearchKind::Explore);
        assert_eq!(sp.intervals, vec![Interval::new(0.0, 2.0)]);
    }

    #[test]
    fn sampling_is_proportional_to_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = SearchSpace {
            kind: SearchKind::Explore,
            intervals: vec![Interval::new(0.0, 1.0), Interval::new(9.0, 10.0)],
        };
        let n = 50_000;
        let mut low = 0;
        for _ in 0..n {
            for c in sample_candidates(&sp, &mut rng) {
                assert!((0.0..=1.0).contains(&c) || (9.0..=10.0).contains(&c));
                if c <= 1.0 {
                    low += 1;
                }
            }
        }
        assert_abs_diff_eq!(low as f64 / (2 * n) as f64, 0.5, epsilon = 0.01);
    }

    #[test]
    fn sampling_stays_in_window_and_handles_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sp = SearchSpace {
            kind: SearchKind::Exploit,
            intervals: vec![Interval::new(4.5, 5.5)],
        };
        for _ in 0..10_000 {
            for c in sample_candidates(&sp, &mut rng) {
                assert!((4.5..=5.5).contains(&c));
            }
        }
        let point = SearchSpace {
            kind: SearchKind::Exploit,
            intervals: vec![Interval::new(2.0, 2.0)],
        };
        assert_eq!(sample_candidates(&point, &mut rng), [2.0, 2.0]);
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_effort([1.2, 0.8], Some(1.0), true), 1.2);
        assert_eq!(select_effort([0.5, 0.6], Some(1.0), true), 1.0);
        assert_eq!(select_effort([0.5, 0.6], None, true), 0.6);
        assert_eq!(select_effort([0.5, 0.6], Some(1.0), false), 0.6);
    }

    proptest! {
        #[test]
        fn window_inside_space_and_disjoint_from_exploration(
            lower in 0.0..5.0f64, width in 0.0..5.0f64, frac in 0.0..=1.0f64, q in 1u32..12,
        ) {
            let s = ActionSpace::new(lower, lower + width);
            let sq = lower + frac * width;
            let w = exploitation_window(&s, q, sq).unwrap();
            prop_assert!(w.lo >= s.lower && w.hi <= s.upper);
            prop_assert!((w.len() - width / q as f64).abs() <= 1e-12 * (1.0 + lower + width));
            for iv in exploration_intervals(&s, &w) {
                prop_assert!(iv.hi <= w.lo || iv.lo >= w.hi);
            }
        }

        #[test]
        fn selection_never_drops_below_status_quo(c1 in 0.0..3.0f64, c2 in 0.0..3.0f64, sq in 0.0..3.0f64) {
            prop_assert!(select_effort([c1, c2], Some(sq), true) >= sq);
        }

        #[test]
        fn threshold_translation_equivariant(
            xs in proptest::collection::vec(-10.0..10.0f64, 2..12),
            c in -50.0..50.0f64,
            level in 0.01..0.99f64,
        ) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            match (exploration_threshold(&xs, level).unwrap(), exploration_threshold(&shifted, level).unwrap()) {
                (Threshold::Value(a), Threshold::Value(b)) => prop_assert!((a + c - b).abs() < 1e-9),
                (Threshold::Degenerate, _) | (_, Threshold::Degenerate) => {}
            }
        }

        #[test]
        fn median_modes_coincide(last in -3.0..3.0f64, mean in -1.0..1.0f64, std in 0.1..2.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let inputs = StrategyInputs { last_estimate: Some(last), mean, std: Some(std), delta: 0.5, status_quo_feasible: true };
            prop_assert_eq!(
                choose_strategy(&inputs, &Calibrated, &Bernoulli, &mut rng),
                choose_strategy(&inputs, &Literal, &Bernoulli, &mut rng)
            );
        }
    }
}
