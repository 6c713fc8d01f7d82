use std::sync::Arc;

use crate::aggregation::{grid_size, FeatureScheme, PsiMode};
use crate::error::{Error, Result};
use crate::policy::CostApprox;
use crate::pomdp::{Belief, TabularPomdp};
use crate::solver::{seeds_from_belief, solve, AggregateValue, Expansion, Mode, SolverConfig};

/// Largest table an oracle solve may build.
pub const ORACLE_TABLE_LIMIT: usize = 1_000_000;

/// Fine resolution used when none is given: 2000 for up to two states, 1000
/// for three, 60 for up to five. Each full grid stays under
/// [`ORACLE_TABLE_LIMIT`].
pub fn default_oracle_resolution(n: usize) -> Option<u32> {
    match n {
        0..=2 => Some(2000),
        3 => Some(1000),
        4..=5 => Some(60),
        _ => None,
    }
}

/// Reference optimal-cost evaluator: the convex-interpolated solution of the
/// identity-feature aggregation at a fine resolution.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    approx: Arc<CostApprox>,
    rho: u32,
    tolerance: f64,
}

impl ExactOracle {
    pub fn eval(&self, b: &Belief) -> f64 {
        self.approx.approx_cost(b)
    }

    pub fn rho(&self) -> u32 {
        self.rho
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn table_len(&self) -> usize {
        self.approx.solution().len()
    }

    /// Lookups that fell outside the oracle's table.
    pub fn misses(&self) -> u64 {
        self.approx.misses()
    }

    pub fn approx(&self) -> &CostApprox {
        &self.approx
    }

    pub fn solution(&self) -> &AggregateValue {
        self.approx.solution()
    }
}

fn resolve_rho(model: &TabularPomdp, rho0: Option<u32>) -> Result<u32> {
    rho0.or_else(|| default_oracle_resolution(model.num_states()))
        .ok_or_else(|| {
            Error::InfeasibleOracle(format!(
                "no default resolution for {} states; pass one explicitly",
                model.num_states()
            ))
        })
}

fn oracle_config(expansion: Expansion, seeds: Vec<crate::aggregation::GridIndex>) -> SolverConfig {
    SolverConfig {
        tolerance: 1e-10,
        expansion,
        seeds,
        table_limit: Some(ORACLE_TABLE_LIMIT),
        ..SolverConfig::default()
    }
}

fn finish(
    model: &TabularPomdp,
    scheme: FeatureScheme,
    rho: u32,
    config: SolverConfig,
) -> Result<ExactOracle> {
    let solution = match solve(model, &scheme, rho, PsiMode::Convex, Mode::Sync, &config) {
        Err(Error::TableLimit { limit }) => {
            return Err(Error::InfeasibleOracle(format!(
                "more than {limit} grid points at resolution {rho}"
            )))
        }
        other => other?,
    };
    Ok(ExactOracle {
        approx: Arc::new(CostApprox::new(scheme, solution, None)?),
        rho,
        tolerance: config.tolerance,
    })
}

/// Oracle over the full grid of the identity scheme.
pub fn exact_oracle(model: &TabularPomdp, rho0: Option<u32>) -> Result<ExactOracle> {
    let rho = resolve_rho(model, rho0)?;
    let n = model.num_states();
    let size = grid_size(rho, n)
        .map_err(|_| Error::InfeasibleOracle(format!("grid at resolution {rho} overflows")))?;
    if size > ORACLE_TABLE_LIMIT as u64 {
        return Err(Error::InfeasibleOracle(format!(
            "{size} grid points at resolution {rho} over {n} states; use a lazily seeded oracle"
        )));
    }
    finish(
        model,
        FeatureScheme::flat(n),
        rho,
        oracle_config(Expansion::Eager, Vec::new()),
    )
}

/// Oracle over the part of the grid reachable from the given beliefs; exact
/// for those beliefs and everything they lead to.
pub fn exact_oracle_lazy(
    model: &TabularPomdp,
    rho0: Option<u32>,
    beliefs: &[Belief],
) -> Result<ExactOracle> {
    let rho = resolve_rho(model, rho0)?;
    let scheme = FeatureScheme::flat(model.num_states());
    let mut seeds = Vec::new();
    for b in beliefs {
        seeds.extend(seeds_from_belief(&scheme, rho, PsiMode::Convex, b)?);
    }
    seeds.sort();
    seeds.dedup();
    finish(model, scheme, rho, oracle_config(Expansion::Lazy, seeds))
}
