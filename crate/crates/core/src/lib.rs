//! Feature-based belief aggregation for finite-state POMDPs.
//!
//! A POMDP's belief space is approximated by a finite set of representative
//! feature beliefs on a simplex grid. The resulting aggregate MDP is solved by
//! value iteration, and its solution is interpolated into a cost function
//! approximation that drives a one-step lookahead policy.

pub mod aggregation;
pub mod error;
pub mod policy;
pub mod pomdp;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
