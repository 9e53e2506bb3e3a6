use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no premium in [0, 1] satisfies the participation constraint")]
    Infeasible,

    #[error("no feasible contract basis: agent utility below reservation level on the whole action space")]
    EmptyActionSpace,

    #[error("effort {effort} cannot be implemented by any premium in [0, 1]")]
    Unimplementable { effort: f64 },

    #[error("status-quo effort {status_quo} lies outside the action space [{lower}, {upper}]")]
    StatusQuoOutside { status_quo: f64, lower: f64, upper: f64 },

    #[error("unknown {kind} `{name}`; registered: {known}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
