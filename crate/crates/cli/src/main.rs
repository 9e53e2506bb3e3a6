use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use agency_core::benchmark::{solve_second_best, turbulence_sigma};
use agency_core::engine::{prepare_all, run_scenarios, BenchmarkSigma, ScenarioConfig};
use agency_core::metrics::{emit_contour_csv, emit_timeseries_csv};
use agency_core::{Capacity, Config, EnvironmentParams};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Agent-based principal-agent simulation with limited information.
///
/// Settings come from, in increasing precedence: built-in defaults, the
/// configuration file, environment variables, command-line flags.
#[derive(Debug, Parser)]
#[command(name = "agency", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, short, global = true, env = "AGENCY_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the selected scenarios and write CSV outputs.
    Run(RunArgs),
    /// Print the second-best benchmark contract.
    Benchmark(BenchmarkArgs),
    /// List the selected scenarios, one per line.
    GridInfo(SelectArgs),
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Only these scenario ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    ids: Vec<usize>,
    /// Only these memory depths (integers or `inf`).
    #[arg(long, value_delimiter = ',')]
    m: Vec<Capacity>,
    /// Only these sigma multipliers.
    #[arg(long = "sigma-mult", value_delimiter = ',')]
    sigma_mult: Vec<f64>,
    /// Only these exploration propensities.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    /// Only these window divisors.
    #[arg(long, value_delimiter = ',')]
    q: Vec<u32>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchmarkSigmaArg {
    Scenario,
    Zero,
}

/// Flags overriding configuration-file values.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long)]
    reservation_utility: Option<f64>,
    #[arg(long)]
    exploration_rule: Option<String>,
    /// Search decision when the estimates give no usable threshold.
    #[arg(long)]
    degenerate_rule: Option<String>,
    #[arg(long)]
    space_rule: Option<String>,
    /// Confidence-interval estimator.
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise level of the normalizing benchmark.
    #[arg(long, value_enum)]
    benchmark_sigma: Option<BenchmarkSigmaArg>,
    #[arg(long)]
    bootstrap_premium: Option<f64>,
    /// Whether the status-quo effort competes with the sampled candidates.
    #[arg(long)]
    status_quo_competes: Option<bool>,
    /// The agent judges an offer only at the effort it was designed for.
    #[arg(long)]
    accept_on_offer_only: bool,
    /// The agent records the exogenous factor even after rejecting.
    #[arg(long)]
    agent_observes_on_reject: Option<bool>,
    /// Sum the first-period shortfall in every term of the distance.
    #[arg(long)]
    manhattan_literal: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    select: SelectArgs,
    /// Output directory, created if absent.
    #[arg(long, short, env = "AGENCY_OUT_DIR", default_value = "agency-out")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, short, env = "AGENCY_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    reservation_utility: Option<f64>,
    /// Mean of the environment.
    #[arg(long)]
    mean: Option<f64>,
    /// Absolute standard deviation of the environment.
    #[arg(long, conflicts_with = "sigma_mult")]
    sigma: Option<f64>,
    /// Standard deviation as a multiple of the noise-free outcome.
    #[arg(long)]
    sigma_mult: Option<f64>,
}

impl Overrides {
    fn apply(&self, config: &mut Config) {
        let sim = &mut config.simulation;
        if let Some(v) = self.seed {
            sim.master_seed = v;
        }
        if let Some(v) = self.replications {
            sim.replications = v;
        }
        if let Some(v) = self.periods {
            sim.periods = v;
        }
        if let Some(v) = self.reservation_utility {
            config.agent.reservation_utility = v;
        }
        let modes = &mut config.modes;
        if let Some(v) = &self.exploration_rule {
            modes.exploration_rule = v.clone();
        }
        if let Some(v) = &self.degenerate_rule {
            modes.degenerate_rule = v.clone();
        }
        if let Some(v) = &self.space_rule {
            modes.space_rule = v.clone();
        }
        if let Some(v) = self.benchmark_sigma {
            modes.benchmark_sigma = match v {
                BenchmarkSigmaArg::Scenario => BenchmarkSigma::Scenario,
                BenchmarkSigmaArg::Zero => BenchmarkSigma::Zero,
            };
        }
        if let Some(v) = self.bootstrap_premium {
            modes.bootstrap_premium = v;
        }
        if let Some(v) = self.status_quo_competes {
            modes.status_quo_competes = v;
        }
        modes.accept_on_offer_only |= self.accept_on_offer_only;
        if let Some(v) = self.agent_observes_on_reject {
            modes.agent_observes_on_reject = v;
        }
        if let Some(v) = &self.interval {
            config.reporting.interval = v.clone();
        }
        if let Some(v) = self.alpha {
            config.reporting.alpha = v;
        }
        config.reporting.manhattan_literal |= self.manhattan_literal;
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    Ok(match path {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    })
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Resolve the configuration and the scenarios it selects. Ids refer to
/// positions in the configured grid, so filtering keeps them stable.
fn select(config_path: Option<&Path>, args: &SelectArgs) -> Result<(Config, Vec<ScenarioConfig>)> {
    let mut config = load_config(config_path)?;
    args.overrides.apply(&mut config);
    config.validate()?;
    let all = config.scenarios();
    if let Some(id) = args.ids.iter().find(|&&id| id >= all.len()) {
        bail!("scenario id {id} out of range; the grid has {} scenarios", all.len());
    }
    let chosen: Vec<ScenarioConfig> = all
        .into_iter()
        .filter(|s| args.ids.is_empty() || args.ids.contains(&s.id))
        .filter(|s| args.m.is_empty() || args.m.contains(&s.memory))
        .filter(|s| args.q.is_empty() || args.q.contains(&s.q))
        .filter(|s| args.delta.is_empty() || args.delta.iter().any(|&d| same(d, s.delta)))
        .filter(|s| {
            args.sigma_mult.is_empty() || args.sigma_mult.iter().any(|&c| same(c, s.sigma_multiplier))
        })
        .collect();
    if chosen.is_empty() {
        bail!("no scenario matches the selection");
    }
    Ok((config, chosen))
}

fn grid_info(config_path: Option<&Path>, args: &SelectArgs) -> Result<()> {
    let (_, scenarios) = select(config_path, args)?;
    for s in &scenarios {
        println!(
            "{}\tm={}\tsigma_mult={}\tdelta={}\tq={}",
            s.id, s.memory, s.sigma_multiplier, s.delta, s.q
        );
    }
    Ok(())
}

fn metadata(config: &Config, scenarios: &[ScenarioConfig]) -> Result<String> {
    let ids: Vec<String> = scenarios.iter().map(|s| s.id.to_string()).collect();
    Ok(format!(
        "[run]\nversion = \"{}\"\nmaster_seed = {}\nscenario_ids = [{}]\n\n{}",
        env!("CARGO_PKG_VERSION"),
        config.simulation.master_seed,
        ids.join(", "),
        config.to_toml_string()?
    ))
}

fn run(config_path: Option<&Path>, args: &RunArgs) -> Result<()> {
    let (config, scenarios) = select(config_path, &args.select)?;
    let workers = match args.workers {
        Some(0) => bail!("worker count must be >= 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    println!(
        "master_seed={} scenarios={} replications={} periods={} workers={}",
        config.simulation.master_seed,
        scenarios.len(),
        config.simulation.replications,
        config.simulation.periods,
        workers
    );
    let meta = metadata(&config, &scenarios)?;
    let prepared = prepare_all(scenarios)?;
    let started = Instant::now();
    let results = run_scenarios(&prepared, workers)?;
    let elapsed = started.elapsed();

    let ts_path = args.out.join("timeseries.csv");
    let contour_path = args.out.join("contour.csv");
    let meta_path = args.out.join("run-metadata.toml");
    emit_timeseries_csv(&results, &ts_path)?;
    emit_contour_csv(&results, &contour_path)?;
    fs::write(&meta_path, meta).with_context(|| format!("cannot write {}", meta_path.display()))?;

    for r in &results {
        println!(
            "{:>3} m={:<3} c={:<4} delta={:<4} q={:<2} p_T={:.4} d={:.4}",
            r.key.id,
            r.key.memory.to_string(),
            r.key.sigma_multiplier,
            r.key.delta,
            r.key.q,
            r.series.last().copied().unwrap_or(f64::NAN),
            r.manhattan
        );
    }
    println!(
        "wrote {}, {}, {} in {:.2}s",
        ts_path.display(),
        contour_path.display(),
        meta_path.display(),
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn benchmark(config_path: Option<&Path>, args: &BenchmarkArgs) -> Result<()> {
    let config = load_config(config_path)?;
    let mut agent = config.agent;
    if let Some(v) = args.eta {
        agent.eta = v;
    }
    if let Some(v) = args.rho {
        agent.rho = v;
    }
    if let Some(v) = args.reservation_utility {
        agent.reservation_utility = v;
    }
    agent.validate()?;
    let mean = args.mean.unwrap_or(config.environment.mean);
    let sigma = match (args.sigma, args.sigma_mult) {
        (Some(s), _) => s,
        (None, Some(c)) => turbulence_sigma(&agent, mean, c)?,
        (None, None) => 0.0,
    };
    let env = EnvironmentParams::new(mean, sigma)?;
    let b = solve_second_best(&agent, &env)?;
    println!("sigma {sigma}");
    println!("p_star {}", b.premium_star);
    println!("a_star {}", b.effort_star);
    println!("x_star {}", b.outcome_star);
    println!("principal_eu {}", b.principal_eu);
    println!("agent_eu {}", b.agent_eu);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let outcome = match &cli.command {
        Command::Run(args) => run(config, args),
        Command::Benchmark(args) => benchmark(config, args),
        Command::GridInfo(args) => grid_info(config, args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
