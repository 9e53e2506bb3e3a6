//! Agent-based simulation of a hidden-action principal-agent relationship
//! in which both parties have limited information about the environment
//! and the principal searches the agent's action space over time.
//!
//! [`benchmark`] solves the classical second-best contract, which serves
//! as the yardstick. [`engine`] runs the period-by-period model on a
//! scenario grid and [`metrics`] condenses the runs into normalized effort
//! curves, confidence bands and Manhattan distances.

pub mod benchmark;
pub mod config;
pub mod contract;
pub mod engine;
pub mod error;
pub mod info;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod search;
pub mod strategy;

pub use benchmark::{brute_force_oracle, solve_second_best, Benchmark};
pub use config::Config;
pub use engine::{run_scenarios, BaseConfig, GridAxes, PreparedScenario, ScenarioConfig};
pub use error::{Error, Result};
pub use info::Capacity;
pub use metrics::ScenarioResult;
pub use model::{AgentParams, Contract, EnvironmentParams};
