//! Tabular POMDP model, beliefs, and the exact belief calculus.

pub(crate) mod belief;
mod calculus;
mod io;
mod model;
mod rollout;

pub use belief::{Belief, BELIEF_SUM_TOLERANCE, PRUNE_THRESHOLD};
pub use calculus::Branch;
pub use io::{ControlEntries, ProblemFile};
pub use model::{Outcome, PomdpBuilder, TabularPomdp, PROBABILITY_TOLERANCE};
pub use rollout::{
    rollout_cost, rollout_cost_with, trace, trial_rng, BeliefEstimator, BeliefPolicy, ExactBayes,
    RolloutConfig, RolloutReport, TraceStep,
};
