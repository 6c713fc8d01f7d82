//! The aggregate Bellman operator and value iteration over representative
//! feature beliefs.

mod mdp;
mod problem;
mod value;

use rayon::prelude::*;

use crate::aggregation::{FeatureScheme, GridIndex, PsiMode};
use crate::error::{Error, Result};
use crate::pomdp::{Belief, TabularPomdp};

pub use mdp::{AggregateMdp, Sweeps};
pub use problem::{AggregateProblem, BiasFunction, ControlExpansion, MemberExpansion};
pub use value::{AggregateValue, Expansion, Mode, SolutionFile};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stop once successive iterates differ by less than this in sup-norm.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub expansion: Expansion,
    /// Starting grid points for lazy expansion.
    pub seeds: Vec<GridIndex>,
    pub bias: Option<BiasFunction>,
    /// Upper bound on the table size; exceeding it is an error.
    pub table_limit: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_sweeps: 100_000,
            expansion: Expansion::Eager,
            seeds: Vec::new(),
            bias: None,
            table_limit: None,
        }
    }
}

impl SolverConfig {
    pub fn lazy(seeds: Vec<GridIndex>) -> Self {
        Self {
            expansion: Expansion::Lazy,
            seeds,
            ..Self::default()
        }
    }
}

/// Grid points that carry aggregation weight for `b`; the natural seeds for
/// a lazy solve started from that belief.
pub fn seeds_from_belief(
    scheme: &FeatureScheme,
    rho: u32,
    psi: PsiMode,
    b: &Belief,
) -> Result<Vec<GridIndex>> {
    let q = scheme.aggregate(b)?;
    Ok(psi.weights(&q, rho).into_iter().map(|e| e.0).collect())
}

/// Value iteration on the aggregate MDP starting from `r = 0`.
///
/// A run that hits `max_sweeps` is returned with `converged == false` rather
/// than as an error.
pub fn solve(
    model: &TabularPomdp,
    scheme: &FeatureScheme,
    rho: u32,
    psi: PsiMode,
    mode: Mode,
    config: &SolverConfig,
) -> Result<AggregateValue> {
    if !(config.tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let problem = AggregateProblem::new(model, scheme, rho, psi)?.with_bias(config.bias.as_ref());
    let (mdp, sweeps) = match (config.expansion, mode) {
        (Expansion::Eager, _) | (Expansion::Lazy, Mode::Sync) => {
            let mut mdp = match config.expansion {
                Expansion::Eager => AggregateMdp::eager(&problem, config.table_limit)?,
                Expansion::Lazy => AggregateMdp::lazy(&problem, &config.seeds, config.table_limit)?,
            };
            let r0 = vec![0.0; mdp.len()];
            let sweeps = match mode {
                Mode::Sync => mdp.iterate_sync(r0, config.tolerance, config.max_sweeps),
                Mode::Async => {
                    mdp.iterate_async(&problem, r0, config.tolerance, config.max_sweeps)?
                }
            };
            (mdp, sweeps)
        }
        (Expansion::Lazy, Mode::Async) => {
            let mut mdp = AggregateMdp::seeded(&problem, &config.seeds, config.table_limit)?;
            let r0 = vec![0.0; mdp.len()];
            let sweeps = mdp.iterate_async(&problem, r0, config.tolerance, config.max_sweeps)?;
            (mdp, sweeps)
        }
    };
    finish(&mdp, sweeps, scheme.num_features(), rho, psi, mode, config)
}

pub fn solve_sync(
    model: &TabularPomdp,
    scheme: &FeatureScheme,
    rho: u32,
    psi: PsiMode,
    config: &SolverConfig,
) -> Result<AggregateValue> {
    solve(model, scheme, rho, psi, Mode::Sync, config)
}

pub fn solve_async(
    model: &TabularPomdp,
    scheme: &FeatureScheme,
    rho: u32,
    psi: PsiMode,
    config: &SolverConfig,
) -> Result<AggregateValue> {
    solve(model, scheme, rho, psi, Mode::Async, config)
}

fn finish(
    mdp: &AggregateMdp,
    sweeps: Sweeps,
    k: usize,
    rho: u32,
    psi: PsiMode,
    mode: Mode,
    config: &SolverConfig,
) -> Result<AggregateValue> {
    let mut values = sweeps.values;
    values.resize(mdp.len(), 0.0);
    let bellman = if mdp.is_closed() {
        mdp.bellman_residual(&values)
    } else {
        f64::NAN
    };
    let mut out = AggregateValue::new(k, rho, psi, mode, mdp.members().to_vec(), values)?;
    out.residual = sweeps.history.last().copied().unwrap_or(0.0);
    out.bellman_residual = bellman;
    out.iterations = sweeps.sweeps;
    out.converged = sweeps.converged;
    out.bias_tag = config.bias.as_ref().map(|b| b.tag().to_string());
    out.history = sweeps.history;
    Ok(out)
}

/// One application of the aggregate Bellman operator, computed directly from
/// the belief calculus (no precomputed rows). Targets missing from the table
/// read as zero and are appended to the result with value zero.
///
/// With `problem.bias` set this is the biased operator.
pub fn apply_h(value: &AggregateValue, problem: &AggregateProblem<'_>) -> Result<AggregateValue> {
    if value.is_empty() {
        return Err(Error::InvalidArgument("value table is empty".into()));
    }
    if value.rho() != problem.rho || value.num_features() != problem.num_features() {
        return Err(Error::InvalidArgument(
            "value table does not match the problem's grid".into(),
        ));
    }
    let alpha = problem.model.discount();
    let rows: Vec<MemberExpansion> = value
        .members()
        .par_iter()
        .map(|g| problem.expand(g))
        .collect::<Result<_>>()?;
    let lookup = |g: &GridIndex| value.get(g).unwrap_or(0.0);
    let new_values: Vec<f64> = rows
        .iter()
        .map(|row| {
            let best = row
                .controls
                .iter()
                .map(|c| c.cost + alpha * c.targets.iter().map(|(g, w)| w * lookup(g)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            best + row.offset
        })
        .collect();
    let mut out = value.clone();
    out.set_values(new_values);
    for row in &rows {
        for c in &row.controls {
            for (g, _) in &c.targets {
                out.push(g.clone(), 0.0);
            }
        }
    }
    Ok(out)
}

/// [`apply_h`] with the stage cost shifted by `bias`.
pub fn apply_h_biased(
    value: &AggregateValue,
    bias: &BiasFunction,
    problem: &AggregateProblem<'_>,
) -> Result<AggregateValue> {
    apply_h(value, &problem.with_bias(Some(bias)))
}
