use thiserror::Error;

use crate::aggregation::SchemeViolation;

/// Errors raised by the model, aggregation, solver and evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("observation {observation} has zero probability under control {control}")]
    ImpossibleObservation { control: usize, observation: usize },

    #[error("policy returned control {control}, but the model has {controls} controls")]
    InvalidPolicy { control: usize, controls: usize },

    #[error("grid size C({rho}+{k}-1, {k}-1) overflows; use implicit (lazy) representative sets")]
    GridOverflow { rho: u32, k: usize },

    #[error("invalid feature scheme: {}", format_violations(.0))]
    InvalidScheme(Vec<SchemeViolation>),

    #[error("exact oracle infeasible: {0}")]
    InfeasibleOracle(String),

    #[error("table limit of {limit} representative beliefs exceeded")]
    TableLimit { limit: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[SchemeViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
