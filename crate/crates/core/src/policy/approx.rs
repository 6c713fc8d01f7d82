use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::aggregation::{FeatureScheme, GridIndex};
use crate::error::{Error, Result};
use crate::pomdp::{Belief, BeliefPolicy, TabularPomdp};
use crate::solver::{AggregateValue, BiasFunction};

/// Interpolated cost function approximation built from a solved table.
///
/// Grid points absent from the table (possible after a lazy solve) read as
/// zero. They are counted in [`misses`](Self::misses) and collected for
/// [`take_missed`](Self::take_missed).
#[derive(Debug)]
pub struct CostApprox {
    scheme: Arc<FeatureScheme>,
    solution: AggregateValue,
    bias: Option<BiasFunction>,
    misses: AtomicU64,
    missed: Mutex<BTreeSet<GridIndex>>,
}

impl CostApprox {
    pub fn new(
        scheme: impl Into<Arc<FeatureScheme>>,
        solution: AggregateValue,
        bias: Option<BiasFunction>,
    ) -> Result<Self> {
        let scheme = scheme.into();
        if scheme.num_features() != solution.num_features() {
            return Err(Error::InvalidArgument(format!(
                "solution has {} features, scheme has {}",
                solution.num_features(),
                scheme.num_features()
            )));
        }
        Ok(Self {
            scheme,
            solution,
            bias,
            misses: AtomicU64::new(0),
            missed: Mutex::new(BTreeSet::new()),
        })
    }

    pub fn scheme(&self) -> &FeatureScheme {
        &self.scheme
    }

    pub fn solution(&self) -> &AggregateValue {
        &self.solution
    }

    pub fn bias(&self) -> Option<&BiasFunction> {
        self.bias.as_ref()
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn reset_misses(&self) {
        self.misses.store(0, Ordering::Relaxed);
        self.missed.lock().expect("miss set poisoned").clear();
    }

    /// Distinct grid points looked up but absent from the table since the
    /// last call (or reset).
    pub fn take_missed(&self) -> Vec<GridIndex> {
        std::mem::take(&mut *self.missed.lock().expect("miss set poisoned"))
            .into_iter()
            .collect()
    }

    /// Aggregation weights of `b` over grid points.
    pub fn psi_weights(&self, b: &Belief) -> Vec<(GridIndex, f64)> {
        let q = self
            .scheme
            .aggregate(b)
            .expect("belief dimension must match the scheme");
        self.solution.psi_mode().weights(&q, self.solution.rho())
    }

    /// The interpolated table value, without the bias term.
    pub fn interpolate(&self, b: &Belief) -> f64 {
        let mut total = 0.0;
        for (g, w) in self.psi_weights(b) {
            match self.solution.get(&g) {
                Some(r) => total += w * r,
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    self.missed.lock().expect("miss set poisoned").insert(g);
                }
            }
        }
        total
    }

    /// `J~(b)`: the interpolated table value plus `V(b)` when biased.
    ///
    /// Panics if `b` is not over the scheme's states.
    pub fn approx_cost(&self, b: &Belief) -> f64 {
        let base = self.interpolate(b);
        match &self.bias {
            Some(v) => base + v.eval(b),
            None => base,
        }
    }

    /// Wraps this approximation as a bias function for another solve.
    pub fn into_bias(self: Arc<Self>, tag: impl Into<String>) -> BiasFunction {
        BiasFunction::new(tag, move |b| self.approx_cost(b))
    }
}

/// Q-factors `g(b, u) + alpha sum_z p(z | b, u) J(F(b, u, z))` for every
/// control; zero-probability observations are skipped.
pub fn q_factors(model: &TabularPomdp, b: &Belief, j: &dyn Fn(&Belief) -> f64) -> Result<Vec<f64>> {
    let alpha = model.discount();
    (0..model.num_controls())
        .map(|u| {
            let future: f64 = model
                .branches(b, u)?
                .iter()
                .map(|br| br.prob * j(&br.belief))
                .sum();
            Ok(model.stage_cost(b, u)? + alpha * future)
        })
        .collect()
}

/// One-step lookahead control and its Q-factor; ties go to the lowest index.
pub fn lookahead(
    model: &TabularPomdp,
    b: &Belief,
    j: &dyn Fn(&Belief) -> f64,
) -> Result<(usize, f64)> {
    let q = q_factors(model, b, j)?;
    let mut best = (0, q[0]);
    for (u, &v) in q.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (u, v);
        }
    }
    Ok(best)
}

/// The one-step lookahead policy defined by a cost approximation.
#[derive(Debug, Clone, Copy)]
pub struct LookaheadPolicy<'a> {
    pub model: &'a TabularPomdp,
    pub approx: &'a CostApprox,
}

impl<'a> LookaheadPolicy<'a> {
    pub fn new(model: &'a TabularPomdp, approx: &'a CostApprox) -> Self {
        Self { model, approx }
    }

    pub fn control(&self, b: &Belief) -> Result<usize> {
        Ok(lookahead(self.model, b, &|x| self.approx.approx_cost(x))?.0)
    }
}

impl BeliefPolicy for LookaheadPolicy<'_> {
    fn act(&self, b: &Belief) -> usize {
        self.control(b).expect("belief must match the model")
    }
}
