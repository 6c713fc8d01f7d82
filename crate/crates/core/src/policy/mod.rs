//! Cost function approximation, lookahead policies, reference oracles and
//! diagnostics for the approximation-error and lower-bound properties.

mod approx;
mod covering;
mod diagnostics;
mod oracle;

pub use approx::{lookahead, q_factors, CostApprox, LookaheadPolicy};
pub use covering::{solve_covering_rollouts, CoveringSolve};
pub use diagnostics::{
    bound_report, bound_report_on, linearity_check, random_belief, sample_beliefs, save_trace_csv,
    write_trace_csv, BoundReport, FootprintStat, Linearity, LINEARITY_TOLERANCE,
};
pub use oracle::{
    default_oracle_resolution, exact_oracle, exact_oracle_lazy, ExactOracle, ORACLE_TABLE_LIMIT,
};
