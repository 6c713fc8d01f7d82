//! Monte Carlo evaluation of belief-feedback policies.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::belief::sample_weighted;
use crate::pomdp::{Belief, TabularPomdp};

/// A policy that maps the current belief to a control index.
pub trait BeliefPolicy: Sync {
    fn act(&self, b: &Belief) -> usize;
}

impl<F: Fn(&Belief) -> usize + Sync> BeliefPolicy for F {
    fn act(&self, b: &Belief) -> usize {
        self(b)
    }
}

/// Belief estimator used inside simulations.
pub trait BeliefEstimator: Sync {
    fn update(
        &self,
        model: &TabularPomdp,
        b: &Belief,
        u: usize,
        z: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Belief>;
}

/// The exact Bayes estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactBayes;

impl BeliefEstimator for ExactBayes {
    fn update(
        &self,
        model: &TabularPomdp,
        b: &Belief,
        u: usize,
        z: usize,
        _: &mut dyn RngCore,
    ) -> Result<Belief> {
        model.belief_update(b, u, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            trials: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub horizon: usize,
}

/// One simulated stage, as written to policy trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: usize,
    pub control: usize,
    pub observation: usize,
    pub belief_entropy: f64,
    pub discounted_cost: f64,
}

/// RNG for one trial; independent of how trials are scheduled on threads.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Mean discounted cost over `trials` simulated trajectories, with the
/// belief tracked by exact Bayes updates.
pub fn rollout_cost(
    model: &TabularPomdp,
    policy: &dyn BeliefPolicy,
    b0: &Belief,
    config: RolloutConfig,
) -> Result<RolloutReport> {
    rollout_cost_with(model, policy, &ExactBayes, b0, config)
}

pub fn rollout_cost_with(
    model: &TabularPomdp,
    policy: &dyn BeliefPolicy,
    estimator: &dyn BeliefEstimator,
    b0: &Belief,
    config: RolloutConfig,
) -> Result<RolloutReport> {
    if config.horizon == 0 || config.trials == 0 {
        return Err(Error::InvalidArgument(
            "horizon and trials must be at least 1".into(),
        ));
    }
    if b0.dim() != model.num_states() {
        return Err(Error::InvalidArgument(
            "initial belief dimension mismatch".into(),
        ));
    }
    let costs: Vec<f64> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t);
            simulate(
                model,
                policy,
                estimator,
                b0,
                config.horizon,
                &mut rng,
                |_| {},
            )
        })
        .collect::<Result<_>>()?;
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let std_error = if costs.len() > 1 {
        let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(RolloutReport {
        mean,
        std_error,
        trials: config.trials,
        horizon: config.horizon,
    })
}

/// A single trajectory with per-stage records.
pub fn trace(
    model: &TabularPomdp,
    policy: &dyn BeliefPolicy,
    b0: &Belief,
    horizon: usize,
    seed: u64,
) -> Result<Vec<TraceStep>> {
    let mut steps = Vec::with_capacity(horizon);
    let mut rng = trial_rng(seed, 0);
    simulate(model, policy, &ExactBayes, b0, horizon, &mut rng, |s| {
        steps.push(s)
    })?;
    Ok(steps)
}

fn simulate(
    model: &TabularPomdp,
    policy: &dyn BeliefPolicy,
    estimator: &dyn BeliefEstimator,
    b0: &Belief,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    mut record: impl FnMut(TraceStep),
) -> Result<f64> {
    let mut state = b0.sample(rng);
    let mut belief = b0.clone();
    let mut total = 0.0;
    let mut disc = 1.0;
    for stage in 0..horizon {
        let u = policy.act(&belief);
        if u >= model.num_controls() {
            return Err(Error::InvalidPolicy {
                control: u,
                controls: model.num_controls(),
            });
        }
        let o = *sample_weighted(model.outcomes(state, u), |o| o.prob, rng);
        total += disc * o.cost;
        disc *= model.discount();
        belief = estimator.update(model, &belief, u, o.observation, rng)?;
        state = o.next;
        record(TraceStep {
            stage,
            control: u,
            observation: o.observation,
            belief_entropy: belief.entropy(),
            discounted_cost: total,
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::PomdpBuilder;

    fn unit_cost_model(alpha: f64) -> TabularPomdp {
        let mut b = PomdpBuilder::new(1, vec!["u".into()], vec!["z".into()], alpha);
        b.transition(0, 0, 0, 1.0)
            .observation(0, 0, 0, 1.0)
            .cost(0, 0, 0, 1.0);
        b.build().unwrap()
    }

    #[test]
    fn geometric_series() {
        let m = unit_cost_model(0.99);
        let cfg = RolloutConfig {
            horizon: 100,
            trials: 5,
            seed: 3,
        };
        let r = rollout_cost(&m, &|_: &Belief| 0usize, &Belief::point(1, 0), cfg).unwrap();
        let exact = (1.0 - 0.99f64.powi(100)) / 0.01;
        assert!((r.mean - exact).abs() < 1e-9);
        assert!((exact - 63.397).abs() < 1e-3);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn invalid_policy_is_reported() {
        let m = unit_cost_model(0.5);
        let cfg = RolloutConfig {
            horizon: 3,
            trials: 2,
            seed: 0,
        };
        let err = rollout_cost(&m, &|_: &Belief| 7usize, &Belief::point(1, 0), cfg).unwrap_err();
        assert!(matches!(err, Error::InvalidPolicy { control: 7, .. }));
        let cfg = RolloutConfig {
            horizon: 0,
            trials: 2,
            seed: 0,
        };
        assert!(rollout_cost(&m, &|_: &Belief| 0usize, &Belief::point(1, 0), cfg).is_err());
    }

    #[test]
    fn trace_records_every_stage() {
        let m = unit_cost_model(0.5);
        let steps = trace(&m, &|_: &Belief| 0usize, &Belief::point(1, 0), 4, 1).unwrap();
        assert_eq!(steps.len(), 4);
        assert!((steps[3].discounted_cost - 1.875).abs() < 1e-15);
    }
}
