//! Period-by-period simulation of the agent-based hidden-action model,
//! replications and the scenario grid.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{solve_second_best, turbulence_sigma, Benchmark};
use crate::contract::{accept_contract, agent_effort, make_offer, Offer};
use crate::error::{Error, Result};
use crate::info::{estimate_theta, Capacity, RollingMemory};
use crate::metrics::{aggregate, ScenarioResult};
use crate::model::{outcome, AgentParams, Contract, EnvironmentParams};
use crate::search::{
    choose_strategy, sample_candidates, search_space, select_effort, ActionSpace, SearchKind,
    StrategyInputs,
};
use crate::strategy::{
    degenerate_rules, exploration_rules, interval_estimators, space_rules, DegenerateRule, ExplorationRule,
    IntervalEstimator, SpaceRule,
};

/// Which noise level the normalizing benchmark effort is computed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkSigma {
    /// Second-best solution at the scenario's own sigma.
    #[default]
    Scenario,
    /// Second-best solution of the noise-free model.
    Zero,
}

/// Model variants and rule selections. Rule names resolve through the
/// registries in [`crate::strategy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Modes {
    pub exploration_rule: String,
    /// Search decision without a usable threshold.
    pub degenerate_rule: String,
    pub space_rule: String,
    pub status_quo_competes: bool,
    pub accept_on_offer_only: bool,
    /// After a rejection the agent still records the realized exogenous
    /// factor; the principal, seeing no outcome, records nothing.
    pub agent_observes_on_reject: bool,
    /// Premium the period-1 action space is derived from.
    pub bootstrap_premium: f64,
    pub benchmark_sigma: BenchmarkSigma,
}

impl Default for Modes {
    fn default() -> Self {
        Self {
            exploration_rule: "calibrated".into(),
            degenerate_rule: "mean".into(),
            space_rule: "widest".into(),
            status_quo_competes: true,
            accept_on_offer_only: false,
            agent_observes_on_reject: true,
            bootstrap_premium: 1.0,
            benchmark_sigma: BenchmarkSigma::Zero,
        }
    }
}

/// Reporting options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reporting {
    pub alpha: f64,
    pub interval: String,
    /// Sum `p_1 - 1` over all periods instead of `p_t - 1`.
    pub manhattan_literal: bool,
}

impl Default for Reporting {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            interval: "normal".into(),
            manhattan_literal: false,
        }
    }
}

/// Everything shared by the cells of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub agent: AgentParams,
    pub environment_mean: f64,
    pub periods: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub modes: Modes,
    pub reporting: Reporting,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            agent: AgentParams::default(),
            environment_mean: 0.0,
            periods: 20,
            replications: 700,
            master_seed: 20_210_517,
            modes: Modes::default(),
            reporting: Reporting::default(),
        }
    }
}

/// Swept axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridAxes {
    #[serde(rename = "m")]
    pub memory: Vec<Capacity>,
    pub sigma_multiplier: Vec<f64>,
    pub delta: Vec<f64>,
    pub q: Vec<u32>,
}

impl Default for GridAxes {
    fn default() -> Self {
        Self {
            memory: vec![Capacity::Bounded(1), Capacity::Bounded(3), Capacity::Unbounded],
            sigma_multiplier: vec![0.05, 0.25, 0.45, 0.65],
            delta: vec![0.25, 0.5, 0.75],
            q: vec![3, 5, 10],
        }
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: usize,
    pub memory: Capacity,
    pub q: u32,
    pub delta: f64,
    pub sigma_multiplier: f64,
    pub base: BaseConfig,
}

impl ScenarioConfig {
    pub fn new(id: usize, memory: Capacity, q: u32, delta: f64, sigma_multiplier: f64, base: BaseConfig) -> Self {
        Self {
            id,
            memory,
            q,
            delta,
            sigma_multiplier,
            base,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "m{}_c{}_d{}_q{}",
            self.memory, self.sigma_multiplier, self.delta, self.q
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.base.agent.validate()?;
        let invalid = |msg: String| Err(Error::Config(msg));
        if self.base.periods < 1 {
            return invalid("periods (T) must be >= 1".into());
        }
        if self.base.replications < 1 {
            return invalid("replications (R) must be >= 1".into());
        }
        if !(self.sigma_multiplier >= 0.0 && self.sigma_multiplier.is_finite()) {
            return invalid(format!("sigma multiplier must be >= 0, got {}", self.sigma_multiplier));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return invalid(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if self.q < 1 {
            return invalid("q must be >= 1".into());
        }
        if let Capacity::Bounded(0) = self.memory {
            return invalid("memory depth m must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.base.modes.bootstrap_premium) {
            return invalid("bootstrap premium must lie in [0, 1]".into());
        }
        let alpha = self.base.reporting.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        Ok(())
    }
}

/// Cartesian product `m x c x delta x q` in lexicographic order; the id is
/// the position in that order.
pub fn scenario_grid(base: &BaseConfig, axes: &GridAxes) -> Vec<ScenarioConfig> {
    let mut out = Vec::with_capacity(
        axes.memory.len() * axes.sigma_multiplier.len() * axes.delta.len() * axes.q.len(),
    );
    for &m in &axes.memory {
        for &c in &axes.sigma_multiplier {
            for &d in &axes.delta {
                for &q in &axes.q {
                    out.push(ScenarioConfig::new(out.len(), m, q, d, c, base.clone()));
                }
            }
        }
    }
    out
}

/// A scenario with its noise level, normalizing benchmark and resolved
/// rules.
#[derive(Clone)]
pub struct PreparedScenario {
    pub config: ScenarioConfig,
    pub environment: EnvironmentParams,
    /// Benchmark whose effort normalizes performance.
    pub benchmark: Benchmark,
    /// Noise-free second-best outcome the sigma is scaled from.
    pub x_star: f64,
    pub exploration: Arc<dyn ExplorationRule>,
    pub degenerate: Arc<dyn DegenerateRule>,
    pub space_rule: Arc<dyn SpaceRule>,
    pub interval: Arc<dyn IntervalEstimator>,
}

impl std::fmt::Debug for PreparedScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreparedScenario")
            .field("config", &self.config)
            .field("environment", &self.environment)
            .field("benchmark", &self.benchmark)
            .field("x_star", &self.x_star)
            .field("exploration", &self.exploration.name())
            .field("degenerate", &self.degenerate.name())
            .field("space_rule", &self.space_rule.name())
            .field("interval", &self.interval.name())
            .finish()
    }
}

impl PreparedScenario {
    /// Compute `x*` without noise, set `sigma = c x*`, and solve the
    /// benchmark used for normalization.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let base = &config.base;
        let agent = base.agent;
        let mean = base.environment_mean;
        let x_star = solve_second_best(&agent, &EnvironmentParams::deterministic(mean))?.outcome_star;
        let sigma = turbulence_sigma(&agent, mean, config.sigma_multiplier)?;
        let environment = EnvironmentParams::new(mean, sigma)?;
        let benchmark = match base.modes.benchmark_sigma {
            BenchmarkSigma::Scenario => solve_second_best(&agent, &environment)?,
            BenchmarkSigma::Zero => solve_second_best(&agent, &EnvironmentParams::deterministic(mean))?,
        };
        if !(benchmark.effort_star > 0.0) {
            return Err(Error::Domain(format!(
                "benchmark effort {} cannot normalize performance",
                benchmark.effort_star
            )));
        }
        Ok(Self {
            exploration: exploration_rules().get(&base.modes.exploration_rule)?,
            degenerate: degenerate_rules().get(&base.modes.degenerate_rule)?,
            space_rule: space_rules().get(&base.modes.space_rule)?,
            interval: interval_estimators().get(&base.reporting.interval)?,
            config,
            environment,
            benchmark,
            x_star,
        })
    }

    pub fn agent(&self) -> &AgentParams {
        &self.config.base.agent
    }
}

/// Per-run mutable state.
#[derive(Debug, Clone)]
pub struct WorldState {
    /// Index of the last completed period (1-based).
    pub t: usize,
    /// Effort the last accepted contract was based on.
    pub status_quo: Option<f64>,
    pub premium: f64,
    pub principal_memory: RollingMemory,
    pub agent_memory: RollingMemory,
    /// Global search is forced next period (after a rejection or an empty
    /// action space).
    pub force_explore: bool,
    pub rng: ChaCha8Rng,
}

/// What happened in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub t: usize,
    /// `None` in the bootstrap period.
    pub strategy: Option<SearchKind>,
    pub desired_effort: f64,
    pub premium: f64,
    pub accepted: bool,
    pub effort: f64,
    pub theta: f64,
    pub outcome: Option<f64>,
    pub estimate: Option<f64>,
    /// Principal's expected utility of the offer under her expectation.
    pub principal_expected_utility: f64,
    /// The desired effort had to be lowered to an implementable one.
    pub fell_back: bool,
    /// No feasible contract basis; the null contract was offered.
    pub empty_space: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub seed: u64,
    pub records: Vec<PeriodRecord>,
}

impl RunTrace {
    pub fn efforts(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.effort)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` of scenario `scenario`, derived by chained SplitMix64
/// mixing so neighbouring indices give unrelated streams.
pub fn run_seed(master_seed: u64, scenario: usize, run: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ scenario as u64) ^ run as u64)
}

impl PreparedScenario {
    fn space_for(&self, premium: f64, expected_theta: f64) -> Result<ActionSpace> {
        self.space_rule.space(premium, expected_theta, self.agent())
    }

    /// Period 1: both memories are empty, the action space comes from the
    /// bootstrap premium and the desired effort is a uniform draw from it.
    pub fn init_run(&self, seed: u64) -> (WorldState, PeriodRecord) {
        let memory = self.config.memory;
        let mut state = WorldState {
            t: 0,
            status_quo: None,
            premium: self.config.base.modes.bootstrap_premium,
            principal_memory: RollingMemory::new(memory),
            agent_memory: RollingMemory::new(memory),
            force_explore: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let expected = state.principal_memory.expectation();
        let (desired, space) = match self.space_for(state.premium, expected) {
            Ok(space) => {
                let u: f64 = state.rng.random();
                (space.lower + u * space.width(), Some(space))
            }
            Err(_) => (0.0, None),
        };
        let record = self.contract_and_realize(&mut state, None, desired, space);
        (state, record)
    }

    /// One period `t >= 2`: search, evaluation, premium, acceptance,
    /// effort, realization and learning.
    pub fn step(&self, state: &mut WorldState) -> PeriodRecord {
        let expected = state.principal_memory.expectation();
        let space = match self.space_for(state.premium, expected) {
            Ok(space) => space,
            Err(_) => return self.contract_and_realize(state, Some(SearchKind::Explore), 0.0, None),
        };
        let status_quo = state.status_quo.filter(|&sq| space.contains(sq)).map(|sq| space.clamp(sq));
        let kind = if state.force_explore {
            SearchKind::Explore
        } else {
            let inputs = StrategyInputs {
                last_estimate: state.principal_memory.last(),
                mean: expected,
                std: state.principal_memory.std_dev(),
                delta: self.config.delta,
                status_quo_feasible: status_quo.is_some(),
            };
            choose_strategy(&inputs, self.exploration.as_ref(), self.degenerate.as_ref(), &mut state.rng)
        };
        let search = search_space(kind, &space, self.config.q, status_quo)
            .expect("status quo was checked against the space");
        let candidates = sample_candidates(&search, &mut state.rng);
        let desired = select_effort(
            candidates,
            status_quo,
            self.config.base.modes.status_quo_competes,
        );
        self.contract_and_realize(state, Some(search.kind), desired, Some(space))
    }

    /// Steps from the premium choice onwards. `space == None` means there
    /// is no feasible contract basis and the null contract is offered.
    fn contract_and_realize(
        &self,
        state: &mut WorldState,
        strategy: Option<SearchKind>,
        desired: f64,
        space: Option<ActionSpace>,
    ) -> PeriodRecord {
        let agent = *self.agent();
        let expected_p = state.principal_memory.expectation();
        let expected_a = state.agent_memory.expectation();
        let empty_space = space.is_none();
        let null_offer = Offer {
            contract: Contract::new(0.0).expect("zero premium"),
            desired_effort: 0.0,
            principal_expected_theta: expected_p,
        };
        let (offer, fell_back) = match space {
            Some(space) => make_offer(desired, expected_p, &space, &agent).unwrap_or((null_offer, true)),
            None => (null_offer, false),
        };
        let agent_space = self
            .space_for(state.premium, expected_a)
            .unwrap_or(ActionSpace::point(0.0));
        let accepted = accept_contract(
            &offer,
            expected_a,
            &agent,
            &agent_space,
            self.config.base.modes.accept_on_offer_only,
        );
        let z: f64 = StandardNormal.sample(&mut state.rng);
        let theta = self.environment.mean + self.environment.sigma * z;
        let premium = offer.contract.premium();
        let principal_expected_utility =
            (1.0 - premium) * outcome(offer.desired_effort, agent.rho, expected_p);
        state.t += 1;

        let mut record = PeriodRecord {
            t: state.t,
            strategy,
            desired_effort: offer.desired_effort,
            premium,
            accepted,
            effort: 0.0,
            theta,
            outcome: None,
            estimate: None,
            principal_expected_utility,
            fell_back,
            empty_space,
        };
        if !accepted {
            if self.config.base.modes.agent_observes_on_reject {
                state.agent_memory.record(theta);
            }
            state.force_explore = true;
            return record;
        }
        let effort = agent_effort(premium, expected_a, &agent_space, &agent);
        let x = outcome(effort, agent.rho, theta);
        let estimate = estimate_theta(x, offer.desired_effort, agent.rho);
        state.principal_memory.record(estimate);
        state.agent_memory.record(theta);
        state.status_quo = Some(offer.desired_effort);
        state.premium = premium;
        state.force_explore = empty_space;
        record.effort = effort;
        record.outcome = Some(x);
        record.estimate = Some(estimate);
        record
    }

    /// A complete replication of `T` periods.
    pub fn run_once(&self, run: usize) -> RunTrace {
        let seed = run_seed(self.config.base.master_seed, self.config.id, run);
        self.run_with_seed(seed)
    }

    pub fn run_with_seed(&self, seed: u64) -> RunTrace {
        let periods = self.config.base.periods;
        let mut records = Vec::with_capacity(periods);
        let (mut state, first) = self.init_run(seed);
        records.push(first);
        while records.len() < periods {
            records.push(self.step(&mut state));
        }
        RunTrace { seed, records }
    }

    /// All `R` replications, aggregated in run-index order.
    pub fn run(&self) -> Result<ScenarioResult> {
        let traces: Vec<RunTrace> = (0..self.config.base.replications)
            .into_par_iter()
            .map(|r| self.run_once(r))
            .collect();
        aggregate(self, &traces)
    }
}

/// Run scenarios with `workers` threads. Replications of all scenarios are
/// scheduled together; results are folded per scenario in run-index order.
pub fn run_scenarios(scenarios: &[PreparedScenario], workers: usize) -> Result<Vec<ScenarioResult>> {
    if workers < 1 {
        return Err(Error::Config("worker count must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let jobs: Vec<(usize, usize)> = scenarios
            .iter()
            .enumerate()
            .flat_map(|(i, s)| (0..s.config.base.replications).map(move |r| (i, r)))
            .collect();
        let traces: Vec<RunTrace> = jobs
            .par_iter()
            .map(|&(i, r)| scenarios[i].run_once(r))
            .collect();
        let mut offset = 0;
        scenarios
            .iter()
            .map(|s| {
                let n = s.config.base.replications;
                let result = aggregate(s, &traces[offset..offset + n]);
                offset += n;
                result
            })
            .collect()
    })
}

/// Prepare every configuration, failing on the first invalid one.
pub fn prepare_all(configs: Vec<ScenarioConfig>) -> Result<Vec<PreparedScenario>> {
    configs.into_iter().map(PreparedScenario::new).collect()
}
