use std::sync::Arc;

use crate::aggregation::{FeatureScheme, GridIndex, PsiMode};
use crate::error::Result;
use crate::policy::{CostApprox, LookaheadPolicy};
use crate::pomdp::{rollout_cost, Belief, RolloutConfig, RolloutReport, TabularPomdp};
use crate::solver::{seeds_from_belief, solve, Expansion, Mode, SolverConfig};

/// A lazy solve grown until the lookahead policy's rollouts stay inside the
/// table.
#[derive(Debug)]
pub struct CoveringSolve {
    pub approx: CostApprox,
    /// Rollout report of the last round, computed with the final table.
    pub report: RolloutReport,
    pub rounds: usize,
    /// False if `max_rounds` ran out while rollouts still left the table.
    pub covered: bool,
}

/// Lazy solve whose table also covers the beliefs met online.
///
/// A lazy table is closed under the aggregate dynamics, but the lookahead
/// policy evaluates the approximation at true posteriors, whose grid points
/// may lie outside it. Each round solves from the current seeds, runs the
/// rollouts, and adds every grid point they missed to the seeds. Since the
/// rollouts are deterministic given the table, a round without misses means
/// its report was computed without any zero fill-ins.
#[allow(clippy::too_many_arguments)]
pub fn solve_covering_rollouts(
    model: &TabularPomdp,
    scheme: impl Into<Arc<FeatureScheme>>,
    rho: u32,
    psi: PsiMode,
    mode: Mode,
    config: &SolverConfig,
    b0: &Belief,
    rollout: RolloutConfig,
    max_rounds: usize,
) -> Result<CoveringSolve> {
    let scheme = scheme.into();
    let mut seeds: Vec<GridIndex> = config.seeds.clone();
    seeds.extend(seeds_from_belief(&scheme, rho, psi, b0)?);
    let mut round = 0;
    loop {
        round += 1;
        seeds.sort();
        seeds.dedup();
        let round_config = SolverConfig {
            expansion: Expansion::Lazy,
            seeds: std::mem::take(&mut seeds),
            ..config.clone()
        };
        let solution = solve(model, &scheme, rho, psi, mode, &round_config)?;
        let approx = CostApprox::new(scheme.clone(), solution, config.bias.clone())?;
        let report = rollout_cost(model, &LookaheadPolicy::new(model, &approx), b0, rollout)?;
        let missed = approx.take_missed();
        if missed.is_empty() || round >= max_rounds {
            return Ok(CoveringSolve {
                covered: missed.is_empty(),
                approx,
                report,
                rounds: round,
            });
        }
        seeds = approx.solution().members().to_vec();
        seeds.extend(missed);
    }
}
