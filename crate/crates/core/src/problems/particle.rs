//! Rejection-sampling particle filter.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::pomdp::belief::sample_weighted;
use crate::pomdp::{Belief, BeliefEstimator, TabularPomdp};

pub const DEFAULT_PARTICLES: usize = 100;

/// Consecutive rejections allowed per particle before the remaining
/// particles are drawn from the exact posterior of the current particle set.
pub const REJECTION_CAP_PER_PARTICLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleSet {
    dim: usize,
    particles: Vec<usize>,
}

impl ParticleSet {
    pub fn new(dim: usize, particles: Vec<usize>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidArgument(
                "particle set must be nonempty".into(),
            ));
        }
        if particles.iter().any(|&i| i >= dim) {
            return Err(Error::InvalidArgument("particle state out of range".into()));
        }
        Ok(Self { dim, particles })
    }

    /// `count` independent draws from `b`.
    pub fn sample<R: Rng + ?Sized>(b: &Belief, count: usize, rng: &mut R) -> Result<Self> {
        Self::new(b.dim(), (0..count).map(|_| b.sample(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[usize] {
        &self.particles
    }

    /// Empirical distribution of the particles.
    pub fn belief(&self) -> Belief {
        let w = 1.0 / self.particles.len() as f64;
        Belief::new(self.dim, self.particles.iter().map(|&i| (i, w)))
            .expect("nonempty particle set")
    }
}

/// Propagates the particles through `u` and keeps successors whose simulated
/// observation equals `z`, until `ps.len()` have been accepted.
pub fn particle_update<R: Rng + ?Sized>(
    model: &TabularPomdp,
    ps: &ParticleSet,
    u: usize,
    z: usize,
    rng: &mut R,
) -> Result<ParticleSet> {
    if ps.dim != model.num_states() {
        return Err(Error::InvalidArgument(
            "particle set dimension mismatch".into(),
        ));
    }
    let empirical = ps.belief();
    if model.observation_prob(&empirical, u, z)? <= 0.0 {
        return Err(Error::ImpossibleObservation {
            control: u,
            observation: z,
        });
    }
    let count = ps.len();
    let cap = REJECTION_CAP_PER_PARTICLE * count;
    let mut out = Vec::with_capacity(count);
    let mut rejections = 0;
    while out.len() < count {
        let i = ps.particles[rng.random_range(0..count)];
        let o = sample_weighted(model.outcomes(i, u), |o| o.prob, rng);
        if o.observation == z {
            out.push(o.next);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= cap {
                let posterior = model.belief_update(&empirical, u, z)?;
                while out.len() < count {
                    out.push(posterior.sample(rng));
                }
            }
        }
    }
    ParticleSet::new(ps.dim, out)
}

/// Belief estimator that resamples the incoming belief into particles and
/// returns the empirical distribution after a rejection-sampling update.
#[derive(Debug, Clone, Copy)]
pub struct ParticleEstimator {
    pub count: usize,
}

impl Default for ParticleEstimator {
    fn default() -> Self {
        Self {
            count: DEFAULT_PARTICLES,
        }
    }
}

impl BeliefEstimator for ParticleEstimator {
    fn update(
        &self,
        model: &TabularPomdp,
        b: &Belief,
        u: usize,
        z: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Belief> {
        let ps = ParticleSet::sample(b, self.count, rng)?;
        match particle_update(model, &ps, u, z, rng) {
            Ok(next) => Ok(next.belief()),
            // the resampled set may have missed every state consistent with z
            Err(Error::ImpossibleObservation { .. }) => model.belief_update(b, u, z),
            Err(e) => Err(e),
        }
    }
}
