//! Information systems about the environment: the principal's memory of
//! estimated exogenous factors and the agent's memory of observed ones.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Memory depth `m`.
/// Serialized as the integer depth or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "CapacityRepr", into = "CapacityRepr")]
pub enum Capacity {
    Bounded(usize),
    Unbounded,
}

impl Capacity {
    pub fn bounded(m: usize) -> Option<Self> {
        (m >= 1).then_some(Capacity::Bounded(m))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapacityRepr {
    Depth(i64),
    Name(String),
}

impl TryFrom<CapacityRepr> for Capacity {
    type Error = String;

    fn try_from(value: CapacityRepr) -> Result<Self, Self::Error> {
        match value {
            CapacityRepr::Depth(m) => usize::try_from(m)
                .ok()
                .and_then(Capacity::bounded)
                .ok_or_else(|| format!("memory depth must be >= 1 or \"inf\", got {m}")),
            CapacityRepr::Name(s) => s.parse(),
        }
    }
}

impl From<Capacity> for CapacityRepr {
    fn from(c: Capacity) -> Self {
        match c {
            Capacity::Bounded(m) => CapacityRepr::Depth(m as i64),
            Capacity::Unbounded => CapacityRepr::Name("inf".into()),
        }
    }
}

impl std::str::FromStr for Capacity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Capacity::Unbounded);
        }
        s.parse::<usize>()
            .ok()
            .and_then(Capacity::bounded)
            .ok_or_else(|| format!("memory depth must be an integer >= 1 or \"inf\", got {s:?}"))
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Bounded(m) => write!(f, "{m}"),
            Capacity::Unbounded => f.write_str("inf"),
        }
    }
}

/// Sophistication of the information systems: memory depth and the
/// divisor `q` of the principal's exploitation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sophistication {
    pub memory: Capacity,
    pub q: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum Store {
    Window(VecDeque<f64>),
    // Welford accumulator; entries themselves are not retained.
    Stream {
        count: usize,
        mean: f64,
        m2: f64,
        last: f64,
    },
}

/// Bounded or unbounded history of environment values, newest last.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingMemory {
    capacity: Capacity,
    store: Store,
}

impl RollingMemory {
    pub fn new(capacity: Capacity) -> Self {
        let store = match capacity {
            Capacity::Bounded(m) => {
                assert!(m >= 1, "memory depth must be at least 1");
                Store::Window(VecDeque::with_capacity(m))
            }
            Capacity::Unbounded => Store::Stream {
                count: 0,
                mean: 0.0,
                m2: 0.0,
                last: 0.0,
            },
        };
        Self { capacity, store }
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn record(&mut self, value: f64) {
        match (&mut self.store, self.capacity) {
            (Store::Window(entries), Capacity::Bounded(m)) => {
                if entries.len() == m {
                    entries.pop_front();
                }
                entries.push_back(value);
            }
            (Store::Stream { count, mean, m2, last }, _) => {
                *count += 1;
                let d = value - *mean;
                *mean += d / *count as f64;
                *m2 += d * (value - *mean);
                *last = value;
            }
            _ => unreachable!("store and capacity disagree"),
        }
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Window(entries) => entries.len(),
            Store::Stream { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Retained entries, oldest first. `None` for unbounded memories,
    /// which keep only running moments.
    pub fn entries(&self) -> Option<&VecDeque<f64>> {
        match &self.store {
            Store::Window(entries) => Some(entries),
            Store::Stream { .. } => None,
        }
    }

    pub fn last(&self) -> Option<f64> {
        match &self.store {
            Store::Window(entries) => entries.back().copied(),
            Store::Stream { count: 0, .. } => None,
            Store::Stream { last, .. } => Some(*last),
        }
    }

    /// Mean of the retained entries; 0 for an empty memory.
    pub fn expectation(&self) -> f64 {
        match &self.store {
            Store::Window(entries) if entries.is_empty() => 0.0,
            Store::Window(entries) => entries.iter().sum::<f64>() / entries.len() as f64,
            Store::Stream { mean, .. } => *mean,
        }
    }

    /// Sample standard deviation (n - 1) of the retained entries; `None`
    /// with fewer than two entries.
    pub fn std_dev(&self) -> Option<f64> {
        match &self.store {
            Store::Window(entries) => {
                let n = entries.len();
                if n < 2 {
                    return None;
                }
                let mean = self.expectation();
                let ss: f64 = entries.iter().map(|v| (v - mean) * (v - mean)).sum();
                Some((ss / (n - 1) as f64).sqrt())
            }
            Store::Stream { count, m2, .. } => {
                (*count >= 2).then(|| (m2 / (*count - 1) as f64).max(0.0).sqrt())
            }
        }
    }
}

/// Principal's estimate of the exogenous factor from the observed outcome
/// and the effort she based the contract on.
pub fn estimate_theta(x: f64, desired_effort: f64, rho: f64) -> f64 {
    x - desired_effort * rho
}
