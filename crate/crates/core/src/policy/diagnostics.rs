use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{GridIndex, PsiMode};
use crate::error::{Error, Result};
use crate::policy::CostApprox;
use crate::pomdp::{trial_rng, Belief, TabularPomdp, TraceStep};

/// Observed spread of the reference cost over one footprint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintStat {
    pub delta: Vec<u32>,
    pub samples: usize,
    pub min: f64,
    pub max: f64,
}

/// Empirical check of the approximation-error bound and, for convex
/// aggregation, of the lower-bound property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Largest observed spread of the reference cost within a footprint set.
    pub epsilon_hat: f64,
    /// `epsilon_hat / (1 - alpha)`.
    pub bound: f64,
    pub sup_error: f64,
    /// `max_b J~(b) - J*(b)`.
    pub max_violation_over: f64,
    /// `max_b J*(b) - J~(b)`.
    pub max_violation_under: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    pub slack: f64,
    pub bound_holds: bool,
    /// Set for convex aggregation only.
    pub lower_bound_holds: Option<bool>,
    pub approx_misses: u64,
    pub footprint_stats: Vec<FootprintStat>,
}

impl BoundReport {
    pub fn violated(&self) -> bool {
        !self.bound_holds || self.lower_bound_holds == Some(false)
    }
}

/// Compares `approx` with the reference `jstar` on explicit beliefs.
pub fn bound_report_on(
    approx: &CostApprox,
    jstar: &(dyn Fn(&Belief) -> f64 + Sync),
    beliefs: &[Belief],
    discount: f64,
    slack: f64,
) -> Result<BoundReport> {
    if beliefs.is_empty() {
        return Err(Error::InvalidArgument(
            "bound report needs at least one belief".into(),
        ));
    }
    approx.reset_misses();
    let evals: Vec<(f64, f64, Vec<(GridIndex, f64)>)> = beliefs
        .par_iter()
        .map(|b| (approx.approx_cost(b), jstar(b), approx.psi_weights(b)))
        .collect();
    let mut spread: HashMap<GridIndex, (usize, f64, f64)> = HashMap::new();
    let (mut over, mut under) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (jt, js, weights) in &evals {
        over = over.max(jt - js);
        under = under.max(js - jt);
        for (g, w) in weights {
            if *w > 0.0 {
                let e = spread
                    .entry(g.clone())
                    .or_insert((0, f64::INFINITY, f64::NEG_INFINITY));
                e.0 += 1;
                e.1 = e.1.min(*js);
                e.2 = e.2.max(*js);
            }
        }
    }
    let k = approx.solution().num_features();
    let mut footprint_stats: Vec<FootprintStat> = spread
        .into_iter()
        .map(|(g, (samples, min, max))| FootprintStat {
            delta: g.to_dense(k),
            samples,
            min,
            max,
        })
        .collect();
    footprint_stats.sort_by(|a, b| a.delta.cmp(&b.delta));
    let epsilon_hat = footprint_stats
        .iter()
        .map(|f| f.max - f.min)
        .fold(0.0, f64::max);
    let bound = epsilon_hat / (1.0 - discount);
    let sup_error = over.max(under);
    let lower_bound_holds =
        (approx.solution().psi_mode() == PsiMode::Convex).then_some(over <= slack);
    Ok(BoundReport {
        epsilon_hat,
        bound,
        sup_error,
        max_violation_over: over,
        max_violation_under: under,
        samples: beliefs.len(),
        seed: None,
        slack,
        bound_holds: sup_error <= bound + slack,
        lower_bound_holds,
        approx_misses: approx.misses(),
        footprint_stats,
    })
}

/// Uniform draws from the simplex over the reachable states of the scheme,
/// followed by the disaggregated belief of every table member.
pub fn sample_beliefs(
    model: &TabularPomdp,
    approx: &CostApprox,
    count: usize,
    seed: u64,
) -> Result<Vec<Belief>> {
    let scheme = approx.scheme();
    let support = scheme.reachable_states(model);
    let mut out: Vec<Belief> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            random_belief(model.num_states(), &support, &mut rng)
        })
        .collect::<Result<_>>()?;
    for g in approx.solution().members() {
        out.push(scheme.disaggregate(g)?);
    }
    Ok(out)
}

/// Uniformly distributed belief over `support`.
pub fn random_belief<R: Rng + ?Sized>(n: usize, support: &[usize], rng: &mut R) -> Result<Belief> {
    let draws: Vec<f64> = support.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    Belief::new(n, support.iter().zip(draws).map(|(&i, w)| (i, w / total)))
}

/// [`bound_report_on`] over `count` sampled beliefs plus all table members.
pub fn bound_report(
    model: &TabularPomdp,
    approx: &CostApprox,
    jstar: &(dyn Fn(&Belief) -> f64 + Sync),
    count: usize,
    seed: u64,
    slack: f64,
) -> Result<BoundReport> {
    let beliefs = sample_beliefs(model, approx, count, seed)?;
    let mut report = bound_report_on(approx, jstar, &beliefs, model.discount(), slack)?;
    report.seed = Some(seed);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Linearity {
    NotApplicable { reason: String },
    Linear { max_deviation: f64 },
    Nonlinear { max_deviation: f64 },
}

impl Linearity {
    pub fn is_linear(&self) -> bool {
        matches!(self, Linearity::Linear { .. })
    }
}

pub const LINEARITY_TOLERANCE: f64 = 1e-9;

/// Checks `J~(g b1 + (1 - g) b2) = g J~(b1) + (1 - g) J~(b2)` (with the bias
/// subtracted, if any) on random triples. Applies to convex aggregation at
/// resolution 1, where the representative beliefs are the unit vectors of
/// the feature space.
pub fn linearity_check(approx: &CostApprox, trials: usize, seed: u64) -> Result<Linearity> {
    let sol = approx.solution();
    if sol.psi_mode() != PsiMode::Convex {
        return Ok(Linearity::NotApplicable {
            reason: "requires convex aggregation".into(),
        });
    }
    if sol.rho() != 1 {
        return Ok(Linearity::NotApplicable {
            reason: format!(
                "resolution {} places more than one grid point per feature",
                sol.rho()
            ),
        });
    }
    let n = approx.scheme().num_states();
    let all: Vec<usize> = (0..n).collect();
    let base = |b: &Belief| approx.approx_cost(b) - approx.bias().map_or(0.0, |v| v.eval(b));
    let mut worst = 0.0f64;
    for t in 0..trials as u64 {
        let mut rng = trial_rng(seed, t);
        let b1 = random_belief(n, &all, &mut rng)?;
        let b2 = random_belief(n, &all, &mut rng)?;
        let gamma: f64 = rng.random();
        let mix = b1.mix(&b2, gamma)?;
        let dev = (base(&mix) - (gamma * base(&b1) + (1.0 - gamma) * base(&b2))).abs();
        worst = worst.max(dev);
    }
    Ok(if worst <= LINEARITY_TOLERANCE {
        Linearity::Linear {
            max_deviation: worst,
        }
    } else {
        Linearity::Nonlinear {
            max_deviation: worst,
        }
    })
}

/// Writes a policy trace as CSV with columns stage, observation, control,
/// belief_entropy and discounted_cost.
pub fn write_trace_csv<W: Write>(steps: &[TraceStep], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "stage",
        "observation",
        "control",
        "belief_entropy",
        "discounted_cost",
    ])
    .map_err(csv_error)?;
    for s in steps {
        out.write_record([
            s.stage.to_string(),
            s.observation.to_string(),
            s.control.to_string(),
            s.belief_entropy.to_string(),
            s.discounted_cost.to_string(),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_trace_csv(steps: &[TraceStep], path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv(steps, std::fs::File::create(path)?)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
