//! Performance measures, confidence bands and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{run_seed, PreparedScenario, RunTrace};
use crate::error::{Error, Result};
use crate::info::Capacity;
use crate::numeric::standard_normal_quantile;

/// Scenario coordinates carried with each result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioKey {
    pub id: usize,
    pub memory: Capacity,
    pub q: u32,
    pub delta: f64,
    pub sigma_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub key: ScenarioKey,
    pub sigma: f64,
    pub effort_star: f64,
    pub x_star: f64,
    /// Average normalized effort per period.
    pub series: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub manhattan: f64,
    /// Final-period effort of every run, in run order.
    pub final_efforts: Vec<f64>,
    /// Number of rejected contracts over all runs and periods.
    pub rejections: usize,
}

/// Mean over runs of `effort / effort_star`, per period. `efforts` holds
/// one row per run.
pub fn normalized_effort_series(efforts: &[Vec<f64>], effort_star: f64) -> Result<Vec<f64>> {
    if !(effort_star > 0.0) {
        return Err(Error::Domain(format!("benchmark effort must be > 0, got {effort_star}")));
    }
    let Some(first) = efforts.first() else {
        return Ok(Vec::new());
    };
    let periods = first.len();
    if efforts.iter().any(|run| run.len() != periods) {
        return Err(Error::Domain("runs have different lengths".into()));
    }
    let n = efforts.len() as f64;
    Ok((0..periods)
        .map(|t| efforts.iter().map(|run| run[t] / effort_star).sum::<f64>() / n)
        .collect())
}

/// Total shortfall `sum_t (p_t - 1)` of a normalized series.
pub fn manhattan_distance(series: &[f64]) -> f64 {
    series.iter().map(|p| p - 1.0).sum()
}

/// `T * (p_1 - 1)`: the sum with the first-period value in every term.
pub fn manhattan_distance_literal(series: &[f64]) -> f64 {
    series.first().map_or(0.0, |p1| series.len() as f64 * (p1 - 1.0))
}

fn mean_and_sd(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    // Shifting by the first sample keeps identical samples exact.
    let shift = samples[0];
    let mean = shift + samples.iter().map(|x| x - shift).sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_interval_inputs(samples: &[f64], alpha: f64) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!(
            "confidence interval needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Normal-approximation interval `mean +- z_{1-alpha/2} s / sqrt(n)`.
pub fn confidence_interval(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_interval_inputs(samples, alpha)?;
    let (mean, sd) = mean_and_sd(samples);
    let half = standard_normal_quantile(1.0 - alpha / 2.0) * sd / (samples.len() as f64).sqrt();
    Ok((mean - half, mean + half))
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_interval(samples: &[f64], alpha: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    check_interval_inputs(samples, alpha)?;
    if resamples < 2 {
        return Err(Error::Domain("bootstrap needs at least 2 resamples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let pick = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((pick(alpha / 2.0), pick(1.0 - alpha / 2.0)))
}

/// Fold the traces of one scenario (in run order) into its result.
pub fn aggregate(scenario: &PreparedScenario, traces: &[RunTrace]) -> Result<ScenarioResult> {
    let config = &scenario.config;
    let effort_star = scenario.benchmark.effort_star;
    let efforts: Vec<Vec<f64>> = traces.iter().map(|t| t.efforts().collect()).collect();
    let series = normalized_effort_series(&efforts, effort_star)?;
    let reporting = &config.base.reporting;
    let mut ci_low = Vec::with_capacity(series.len());
    let mut ci_high = Vec::with_capacity(series.len());
    for (t, &p) in series.iter().enumerate() {
        let column: Vec<f64> = efforts.iter().map(|run| run[t] / effort_star).collect();
        let (lo, hi) = if column.len() < 2 {
            (p, p)
        } else {
            let seed = run_seed(config.base.master_seed ^ 0xC1, config.id, t);
            scenario.interval.interval(&column, reporting.alpha, seed)?
        };
        ci_low.push(lo);
        ci_high.push(hi);
    }
    let manhattan = if reporting.manhattan_literal {
        manhattan_distance_literal(&series)
    } else {
        manhattan_distance(&series)
    };
    Ok(ScenarioResult {
        key: ScenarioKey {
            id: config.id,
            memory: config.memory,
            q: config.q,
            delta: config.delta,
            sigma_multiplier: config.sigma_multiplier,
        },
        sigma: scenario.environment.sigma,
        effort_star,
        x_star: scenario.x_star,
        series,
        ci_low,
        ci_high,
        manhattan,
        final_efforts: efforts.iter().filter_map(|run| run.last().copied()).collect(),
        rejections: traces
            .iter()
            .flat_map(|t| t.records.iter())
            .filter(|r| !r.accepted)
            .count(),
    })
}

/// Row of the time-series file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub scenario_id: usize,
    pub m: String,
    pub q: u32,
    pub delta: f64,
    pub sigma_mult: f64,
    pub t: usize,
    pub p_tilde: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Row of the contour file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRow {
    pub m: String,
    pub q: u32,
    pub delta: f64,
    pub sigma_mult: f64,
    pub d: f64,
}

const TIMESERIES_HEADER: [&str; 9] = [
    "scenario_id", "m", "q", "delta", "sigma_mult", "t", "p_tilde", "ci_low", "ci_high",
];
const CONTOUR_HEADER: [&str; 5] = ["m", "q", "delta", "sigma_mult", "d"];

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl Iterator<Item = T>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    let mut inner = writer
        .into_inner()
        .map_err(|e| io_err(std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(io_err)
}

pub fn emit_timeseries_csv(results: &[ScenarioResult], path: &Path) -> Result<()> {
    let rows = results.iter().flat_map(|r| {
        (0..r.series.len()).map(move |i| TimeseriesRow {
            scenario_id: r.key.id,
            m: r.key.memory.to_string(),
            q: r.key.q,
            delta: r.key.delta,
            sigma_mult: r.key.sigma_multiplier,
            t: i + 1,
            p_tilde: r.series[i],
            ci_low: r.ci_low[i],
            ci_high: r.ci_high[i],
        })
    });
    write_rows(path, &TIMESERIES_HEADER, rows)
}

pub fn emit_contour_csv(results: &[ScenarioResult], path: &Path) -> Result<()> {
    let rows = results.iter().map(|r| ContourRow {
        m: r.key.memory.to_string(),
        q: r.key.q,
        delta: r.key.delta,
        sigma_mult: r.key.sigma_multiplier,
        d: r.manhattan,
    });
    write_rows(path, &CONTOUR_HEADER, rows)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_timeseries_csv(path: &Path) -> Result<Vec<TimeseriesRow>> {
    read_rows(path)
}

pub fn read_contour_csv(path: &Path) -> Result<Vec<ContourRow>> {
    read_rows(path)
}
