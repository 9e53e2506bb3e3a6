//! Integration tests across the benchmark, engine, metrics and config modules.

use agency_core::benchmark::{agent_best_response, brute_force_oracle, solve_second_best};
use agency_core::engine::{prepare_all, run_scenarios, BaseConfig, PreparedScenario, ScenarioConfig};
use agency_core::metrics::{
    aggregate, emit_contour_csv, emit_timeseries_csv, manhattan_distance, read_contour_csv, read_timeseries_csv,
};
use agency_core::{AgentParams, Capacity, Config, EnvironmentParams};
use approx::assert_abs_diff_eq;

fn small(replications: usize, periods: usize) -> BaseConfig {
    BaseConfig {
        replications,
        periods,
        ..BaseConfig::default()
    }
}

#[test]
fn default_benchmark_matches_brute_force() {
    let agent = AgentParams::default();
    let env = EnvironmentParams::deterministic(0.0);
    let b = solve_second_best(&agent, &env).unwrap();
    let o = brute_force_oracle(&agent, &env, 1e-4, 1e-4).unwrap();
    assert_abs_diff_eq!(b.premium_star, 0.0200278, epsilon = 1e-6);
    assert_abs_diff_eq!(b.effort_star, 1.9172280, epsilon = 1e-6);
    assert_abs_diff_eq!(b.outcome_star, 95.8614, epsilon = 1e-3);
    assert_abs_diff_eq!(b.premium_star, o.premium_star, epsilon = 2e-4);
    // One effort step is worth about rho * 1e-4 of principal utility.
    assert_abs_diff_eq!(b.principal_eu, o.principal_eu, epsilon = 1e-2);
    assert_abs_diff_eq!(agent_best_response(b.premium_star, &agent, &env), b.effort_star, epsilon = 1e-8);
}

#[test]
fn toy_aggregate_matches_hand_computation() {
    let scenario = PreparedScenario::new(ScenarioConfig::new(0, Capacity::Bounded(3), 5, 0.5, 0.25, small(3, 4))).unwrap();
    let traces: Vec<_> = (0..3).map(|r| scenario.run_once(r)).collect();
    let result = aggregate(&scenario, &traces).unwrap();
    assert_eq!(result.series.len(), 4);
    for t in 0..4 {
        let mean = traces.iter().map(|tr| tr.records[t].effort).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(result.series[t], mean / result.effort_star, epsilon = 1e-12);
        assert!(result.ci_low[t] <= result.series[t] && result.series[t] <= result.ci_high[t]);
    }
    let d: f64 = result.series.iter().map(|p| p - 1.0).sum();
    assert_abs_diff_eq!(result.manhattan, d, epsilon = 1e-12);
    assert_abs_diff_eq!(manhattan_distance(&result.series), d, epsilon = 1e-12);
    let finals: Vec<f64> = traces.iter().map(|tr| tr.records[3].effort).collect();
    assert_eq!(result.final_efforts, finals);
}

#[test]
fn runs_are_reproducible_and_worker_independent() {
    let configs: Vec<_> = (0..4)
        .map(|i| ScenarioConfig::new(i, Capacity::Bounded(1 + i), 5, 0.5, 0.45, small(20, 10)))
        .collect();
    let prepared = prepare_all(configs).unwrap();
    let one = run_scenarios(&prepared, 1).unwrap();
    let three = run_scenarios(&prepared, 3).unwrap();
    assert_eq!(one, three);
    let a = prepared[0].run_once(7);
    let b = prepared[0].run_once(7);
    assert_eq!(a, b);
    assert_ne!(prepared[0].run_once(8).seed, a.seed);
}

#[test]
fn csv_round_trip_preserves_values() {
    let configs: Vec<_> = [Capacity::Bounded(1), Capacity::Unbounded]
        .into_iter()
        .enumerate()
        .map(|(i, m)| ScenarioConfig::new(i, m, 3, 0.25, 0.65, small(15, 6)))
        .collect();
    let results = run_scenarios(&prepare_all(configs).unwrap(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ts = dir.path().join("timeseries.csv");
    let ct = dir.path().join("contour.csv");
    emit_timeseries_csv(&results, &ts).unwrap();
    emit_contour_csv(&results, &ct).unwrap();

    let rows = read_timeseries_csv(&ts).unwrap();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let r = &results[row.scenario_id];
        assert_eq!(row.m, r.key.memory.to_string());
        assert_eq!(row.q, 3);
        assert_abs_diff_eq!(row.p_tilde, r.series[row.t - 1], epsilon = 1e-12);
        assert_abs_diff_eq!(row.ci_low, r.ci_low[row.t - 1], epsilon = 1e-12);
    }
    let contour = read_contour_csv(&ct).unwrap();
    assert_eq!(contour.len(), 2);
    assert_eq!(contour[1].m, "inf");
    for (row, r) in contour.iter().zip(&results) {
        assert_abs_diff_eq!(row.d, r.manhattan, epsilon = 1e-12);
    }
}

#[test]
fn config_file_drives_the_grid() {
    let text = "[simulation]\nreplications = 5\nperiods = 3\nmaster_seed = 11\n\n[grid]\nm = [\"inf\"]\nsigma_multiplier = [0.05]\ndelta = [0.5]\nq = [3, 5]\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, text).unwrap();
    let config = Config::load(&path).unwrap();
    let scenarios = config.scenarios();
    assert_eq!(scenarios.len(), 2);
    assert!(scenarios.iter().all(|s| s.memory == Capacity::Unbounded && s.base.master_seed == 11));
    let results = run_scenarios(&prepare_all(scenarios).unwrap(), 1).unwrap();
    assert!(results.iter().all(|r| r.series.len() == 3 && r.final_efforts.len() == 5));

    std::fs::write(&path, "[grid]\nq = 3\n").unwrap();
    let msg = Config::load(&path).unwrap_err().to_string();
    assert!(msg.contains("exp.toml") && msg.contains("line 2"), "{msg}");
}

#[test]
fn noise_free_unbounded_memory_nears_the_benchmark() {
    let scenario = PreparedScenario::new(ScenarioConfig::new(0, Capacity::Unbounded, 1, 0.5, 0.0, small(30, 20))).unwrap();
    let result = scenario.run().unwrap();
    assert!(result.series.iter().all(|p| *p <= 1.0 + 1e-9));
    assert!(*result.series.last().unwrap() > 0.95);
    assert_eq!(result.rejections, 0);
}
