#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use beliefagg::aggregation::{Feature, FeatureBelief, FeatureScheme, GridIndex, PsiMode};
use beliefagg::pomdp::{Belief, PomdpBuilder, TabularPomdp};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random sparse POMDP: each `(i, u)` moves to one to three states, every
/// `(u, j)` gets a full random observation row, costs lie in `[-1, 1]`.
pub fn random_model<R: Rng>(
    rng: &mut R,
    n: usize,
    nu: usize,
    nz: usize,
    alpha: f64,
) -> TabularPomdp {
    let controls = (0..nu).map(|u| format!("u{u}")).collect();
    let observations = (0..nz).map(|z| format!("z{z}")).collect();
    let mut b = PomdpBuilder::new(n, controls, observations, alpha);
    b.renormalize(true);
    for u in 0..nu {
        for i in 0..n {
            let mut targets: Vec<usize> = (0..n).collect();
            targets.shuffle(rng);
            targets.truncate(rng.random_range(1..=3.min(n)));
            let w = random_simplex(rng, targets.len());
            for (&j, p) in targets.iter().zip(w) {
                b.transition(u, i, j, p);
                b.cost(i, u, j, rng.random_range(-1.0..1.0));
            }
        }
        for j in 0..n {
            for (z, p) in random_simplex(rng, nz).into_iter().enumerate() {
                b.observation(u, j, z, p);
            }
        }
    }
    b.build().expect("random model is valid")
}

pub fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random scheme with `k` disjoint nonempty member sets, random positive
/// disaggregation inside each, and random aggregation rows for the states
/// left outside every member set.
pub fn random_scheme<R: Rng>(rng: &mut R, n: usize, k: usize) -> FeatureScheme {
    assert!(k <= n);
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(rng);
    let mut sets: Vec<Vec<usize>> = states[..k].iter().map(|&i| vec![i]).collect();
    let mut loose = Vec::new();
    for &i in &states[k..] {
        if rng.random_bool(0.6) {
            sets[rng.random_range(0..k)].push(i);
        } else {
            loose.push(i);
        }
    }
    let features = sets
        .into_iter()
        .enumerate()
        .map(|(x, members)| {
            let d = random_simplex(rng, members.len());
            Feature {
                name: format!("f{x}"),
                disagg: members.iter().copied().zip(d).collect(),
                members,
            }
        })
        .collect();
    let mut phi = Vec::new();
    for &j in &loose {
        for (x, p) in random_simplex(rng, k).into_iter().enumerate() {
            phi.push((j, x, p));
        }
    }
    FeatureScheme::new(n, features, &phi).expect("random scheme is valid")
}

/// Dense Bayes update straight from the outcome lists: the observation
/// probability and the normalized posterior, or `None` if `z` cannot occur.
pub fn dense_update(
    model: &TabularPomdp,
    b: &[f64],
    u: usize,
    z: usize,
) -> Option<(f64, Vec<f64>)> {
    let mut next = vec![0.0; model.num_states()];
    for (i, &bi) in b.iter().enumerate() {
        if bi == 0.0 {
            continue;
        }
        for o in model.outcomes(i, u) {
            if o.observation == z {
                next[o.next] += bi * o.prob;
            }
        }
    }
    let total: f64 = next.iter().sum();
    if total <= 0.0 {
        return None;
    }
    next.iter_mut().for_each(|x| *x /= total);
    Some((total, next))
}

/// Dense expected stage cost.
pub fn dense_cost(model: &TabularPomdp, b: &[f64], u: usize) -> f64 {
    b.iter()
        .enumerate()
        .map(|(i, &bi)| {
            bi * model
                .outcomes(i, u)
                .iter()
                .map(|o| o.prob * o.cost)
                .sum::<f64>()
        })
        .sum()
}

/// Dense `Phi(b)` from the aggregation rows.
pub fn dense_aggregate(scheme: &FeatureScheme, b: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; scheme.num_features()];
    for (j, &bj) in b.iter().enumerate() {
        for &(x, p) in scheme.phi_row(j) {
            q[x] += bj * p;
        }
    }
    q
}

/// All probability vectors on the grid `{0, 1/steps, ..., 1}^n`.
pub fn product_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=steps).map(move |i| {
                    let mut w = v.clone();
                    w.push(i as f64 / steps as f64);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn belief(dense: &[f64]) -> Belief {
    Belief::from_dense(dense).expect("valid belief")
}

/// Dense `D(g)` for a grid point given by its counts.
pub fn dense_disaggregate(scheme: &FeatureScheme, g: &[u32], rho: u32) -> Vec<f64> {
    let mut b = vec![0.0; scheme.num_states()];
    for (x, &d) in g.iter().enumerate() {
        for &(i, w) in &scheme.features()[x].disagg {
            b[i] += d as f64 / rho as f64 * w;
        }
    }
    b
}

/// Breadth-first closure of `seed` under `psi o Phi o F o D`, computed with
/// the dense belief update.
pub fn independent_closure(
    model: &TabularPomdp,
    scheme: &FeatureScheme,
    rho: u32,
    psi: PsiMode,
    seed: &GridIndex,
) -> BTreeSet<GridIndex> {
    let k = scheme.num_features();
    let mut seen = BTreeSet::from([seed.clone()]);
    let mut queue = VecDeque::from([seed.clone()]);
    while let Some(g) = queue.pop_front() {
        let b = dense_disaggregate(scheme, &g.to_dense(k), rho);
        for u in 0..model.num_controls() {
            for z in 0..model.num_observations() {
                let Some((_, next)) = dense_update(model, &b, u, z) else {
                    continue;
                };
                let q = FeatureBelief::from_dense(&dense_aggregate(scheme, &next)).unwrap();
                for (t, w) in psi.weights(&q, rho) {
                    if w > 0.0 && seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    seen
}
