use std::fmt;
use std::sync::Arc;

use crate::aggregation::{FeatureBelief, FeatureScheme, GridIndex, PsiMode};
use crate::error::{Error, Result};
use crate::pomdp::{Belief, TabularPomdp};

/// A bounded function of the belief used to shift the stage cost.
#[derive(Clone)]
pub struct BiasFunction {
    tag: String,
    eval: Arc<dyn Fn(&Belief) -> f64 + Send + Sync>,
}

impl BiasFunction {
    pub fn new(
        tag: impl Into<String>,
        eval: impl Fn(&Belief) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            tag: tag.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant {c}"), move |_| c)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn eval(&self, b: &Belief) -> f64 {
        (self.eval)(b)
    }
}

impl fmt::Debug for BiasFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BiasFunction")
            .field("tag", &self.tag)
            .finish()
    }
}

/// Everything needed to evaluate the aggregate Bellman operator: the model,
/// the feature scheme, the grid resolution, the aggregation rule and an
/// optional bias function.
#[derive(Debug, Clone, Copy)]
pub struct AggregateProblem<'a> {
    pub model: &'a TabularPomdp,
    pub scheme: &'a FeatureScheme,
    pub rho: u32,
    pub psi: PsiMode,
    pub bias: Option<&'a BiasFunction>,
}

/// Expected stage cost and weighted successor grid points of one control.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlExpansion {
    pub cost: f64,
    pub targets: Vec<(GridIndex, f64)>,
}

/// One row of the aggregate MDP: per-control expansions plus the constant
/// `-V(D(q))` added outside the minimization (zero without bias).
#[derive(Debug, Clone, PartialEq)]
pub struct MemberExpansion {
    pub offset: f64,
    pub controls: Vec<ControlExpansion>,
}

impl<'a> AggregateProblem<'a> {
    pub fn new(
        model: &'a TabularPomdp,
        scheme: &'a FeatureScheme,
        rho: u32,
        psi: PsiMode,
    ) -> Result<Self> {
        if scheme.num_states() != model.num_states() {
            return Err(Error::InvalidArgument(format!(
                "scheme covers {} states, model has {}",
                scheme.num_states(),
                model.num_states()
            )));
        }
        if rho == 0 {
            return Err(Error::InvalidArgument(
                "grid resolution must be positive".into(),
            ));
        }
        if model.num_controls() == 0 {
            return Err(Error::InvalidModel("model has no controls".into()));
        }
        Ok(Self {
            model,
            scheme,
            rho,
            psi,
            bias: None,
        })
    }

    pub fn with_bias(mut self, bias: Option<&'a BiasFunction>) -> Self {
        self.bias = bias;
        self
    }

    pub fn num_features(&self) -> usize {
        self.scheme.num_features()
    }

    fn check_member(&self, q: &GridIndex) -> Result<()> {
        if !q.is_valid_for(self.num_features(), self.rho) {
            return Err(Error::InvalidArgument(format!(
                "grid point {:?} is not valid for {} features at resolution {}",
                q.entries(),
                self.num_features(),
                self.rho
            )));
        }
        Ok(())
    }

    /// `G(q, u, z) = Phi(F(D(q), u, z))`.
    pub fn g_map(&self, q: &GridIndex, u: usize, z: usize) -> Result<FeatureBelief> {
        self.check_member(q)?;
        let b = self.scheme.disaggregate(q)?;
        let next = self.model.belief_update(&b, u, z)?;
        self.scheme.aggregate(&next)
    }

    /// Grid points carrying positive aggregation weight for a belief.
    pub fn psi_targets(&self, b: &Belief) -> Result<Vec<(GridIndex, f64)>> {
        let q = self.scheme.aggregate(b)?;
        Ok(self.psi.weights(&q, self.rho))
    }

    /// Computes the stage costs and successor weights of `q` from the belief
    /// calculus. Observation branches with zero probability are skipped.
    pub fn expand(&self, q: &GridIndex) -> Result<MemberExpansion> {
        self.check_member(q)?;
        let alpha = self.model.discount();
        let b = self.scheme.disaggregate(q)?;
        let offset = self.bias.map_or(0.0, |v| -v.eval(&b));
        let mut controls = Vec::with_capacity(self.model.num_controls());
        for u in 0..self.model.num_controls() {
            let mut cost = self.model.stage_cost(&b, u)?;
            let mut targets = Vec::new();
            let mut shift = 0.0;
            for br in self.model.branches(&b, u)? {
                if let Some(v) = self.bias {
                    shift += br.prob * v.eval(&br.belief);
                }
                let qn = self.scheme.aggregate(&br.belief)?;
                for (g, w) in self.psi.weights(&qn, self.rho) {
                    targets.push((g, br.prob * w));
                }
            }
            if self.bias.is_some() {
                cost += alpha * shift;
            }
            controls.push(ControlExpansion { cost, targets });
        }
        Ok(MemberExpansion { offset, controls })
    }

    /// Direct evaluation of the (biased) aggregate Bellman operator at `q`,
    /// reading successor values through `lookup`. Returns the minimizing
    /// value and control (lowest index on ties).
    pub fn bellman_at(
        &self,
        q: &GridIndex,
        lookup: impl Fn(&GridIndex) -> f64,
    ) -> Result<(f64, usize)> {
        let alpha = self.model.discount();
        let row = self.expand(q)?;
        let mut best = (f64::INFINITY, 0);
        for (u, c) in row.controls.iter().enumerate() {
            let future: f64 = c.targets.iter().map(|(g, w)| w * lookup(g)).sum();
            let v = c.cost + alpha * future;
            if v < best.0 {
                best = (v, u);
            }
        }
        Ok((best.0 + row.offset, best.1))
    }
}
