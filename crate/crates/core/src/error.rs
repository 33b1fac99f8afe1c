use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the simulation and analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock order {order} exceeds the supported cap of {cap}")]
    UnsupportedOrder { order: usize, cap: usize },

    #[error("invalid photon distribution: {0}")]
    InvalidDistribution(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("truncation: {0}")]
    Truncation(String),

    #[error("grid resolution: {0}")]
    GridResolution(String),

    #[error("empty filter chain")]
    EmptyFilterChain,

    #[error("unsupported filter: {0}")]
    UnsupportedFilter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value in input data at index {0}")]
    NonFiniteData(usize),

    #[error("escape efficiency undefined when both transmittance and loss are zero")]
    UndefinedEfficiency,

    #[error("invalid configuration:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed frame file {path}: {reason}")]
    FrameFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One offending configuration key together with what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub problem: String,
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {}: {}", i.key, i.problem))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
