use std::collections::HashMap;

use crate::error::{Error, Result};

/// Tolerance on row sums of transition and observation distributions.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Row sums further than this from one are rejected even when
/// renormalization is requested.
const RENORMALIZE_LIMIT: f64 = 1e-6;

/// One joint outcome `(j, z)` of applying a control in a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub observation: usize,
    pub prob: f64,
    pub cost: f64,
}

#[derive(Debug, Clone)]
struct OutcomeTable {
    offsets: Vec<usize>,
    outcomes: Vec<Outcome>,
}

/// Finite POMDP with sparse dynamics.
///
/// Internally each `(i, u)` pair owns a list of joint outcomes `(j, z)` with
/// probability `p_ij(u) * p(z | j, u)` and cost `g(i, u, j)`. Models given in
/// the usual `p(z | j, u)` form expand into this representation; transitions
/// may also emit a fixed observation on their own branch, which covers
/// problems where what is observed depends on the transition taken.
#[derive(Debug, Clone)]
pub struct TabularPomdp {
    n: usize,
    controls: Vec<String>,
    observations: Vec<String>,
    discount: f64,
    tables: Vec<OutcomeTable>,
    expected_cost: Vec<Vec<f64>>,
}

impl TabularPomdp {
    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn control_index(&self, name: &str) -> Option<usize> {
        self.controls.iter().position(|c| c == name)
    }

    /// Joint outcomes of applying `u` in state `i`, sorted by `(next, observation)`.
    pub fn outcomes(&self, i: usize, u: usize) -> &[Outcome] {
        let t = &self.tables[u];
        &t.outcomes[t.offsets[i]..t.offsets[i + 1]]
    }

    /// `sum_j p_ij(u) g(i, u, j)`.
    pub fn expected_cost(&self, i: usize, u: usize) -> f64 {
        self.expected_cost[u][i]
    }

    /// Marginal transition row `(j, p_ij(u))`, sorted by `j`.
    pub fn transition_row(&self, i: usize, u: usize) -> Vec<(usize, f64)> {
        let mut row: Vec<(usize, f64)> = self
            .outcomes(i, u)
            .iter()
            .map(|o| (o.next, o.prob))
            .collect();
        crate::pomdp::belief::merge_sorted(&mut row);
        row
    }

    pub(crate) fn check_control(&self, u: usize) -> Result<()> {
        if u >= self.controls.len() {
            return Err(Error::InvalidArgument(format!(
                "control {u} out of range ({} controls)",
                self.controls.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_observation(&self, z: usize) -> Result<()> {
        if z >= self.observations.len() {
            return Err(Error::InvalidArgument(format!(
                "observation {z} out of range ({} observations)",
                self.observations.len()
            )));
        }
        Ok(())
    }
}

/// Accumulates model data and validates it into a [`TabularPomdp`].
#[derive(Debug, Clone)]
pub struct PomdpBuilder {
    n: usize,
    controls: Vec<String>,
    observations: Vec<String>,
    discount: f64,
    transitions: Vec<(usize, usize, usize, f64, Option<usize>)>,
    observation_model: Vec<(usize, usize, usize, f64)>,
    costs: Vec<(usize, usize, usize, f64)>,
    renormalize: bool,
}

impl PomdpBuilder {
    pub fn new(n: usize, controls: Vec<String>, observations: Vec<String>, discount: f64) -> Self {
        Self {
            n,
            controls,
            observations,
            discount,
            transitions: Vec::new(),
            observation_model: Vec::new(),
            costs: Vec::new(),
            renormalize: false,
        }
    }

    /// `p_ij(u)`; the observation on arrival follows `p(z | j, u)`.
    pub fn transition(&mut self, u: usize, i: usize, j: usize, p: f64) -> &mut Self {
        self.transitions.push((u, i, j, p, None));
        self
    }

    /// `p_ij(u)` on a branch that always emits observation `z`.
    pub fn transition_observed(
        &mut self,
        u: usize,
        i: usize,
        j: usize,
        p: f64,
        z: usize,
    ) -> &mut Self {
        self.transitions.push((u, i, j, p, Some(z)));
        self
    }

    /// `p(z | j, u)`.
    pub fn observation(&mut self, u: usize, j: usize, z: usize, p: f64) -> &mut Self {
        self.observation_model.push((u, j, z, p));
        self
    }

    /// `g(i, u, j)`; unspecified costs are zero.
    pub fn cost(&mut self, i: usize, u: usize, j: usize, g: f64) -> &mut Self {
        self.costs.push((i, u, j, g));
        self
    }

    /// Rescale rows whose sums are off by rounding (up to 1e-6) instead of rejecting them.
    pub fn renormalize(&mut self, yes: bool) -> &mut Self {
        self.renormalize = yes;
        self
    }

    pub fn build(&self) -> Result<TabularPomdp> {
        let (n, nu, nz) = (self.n, self.controls.len(), self.observations.len());
        if n == 0 {
            return Err(Error::InvalidModel("model has no states".into()));
        }
        if nu == 0 {
            return Err(Error::InvalidModel("model has no controls".into()));
        }
        if nz == 0 {
            return Err(Error::InvalidModel("model has no observations".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount {} outside (0, 1)",
                self.discount
            )));
        }
        let check_p = |p: f64, what: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidModel(format!(
                    "{what} probability {p} outside [0, 1]"
                )));
            }
            Ok(())
        };

        // (u, j) -> [(z, p)]
        let mut obs_rows: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for &(u, j, z, p) in &self.observation_model {
            if u >= nu || j >= n || z >= nz {
                return Err(Error::InvalidModel(format!(
                    "observation entry (u={u}, j={j}, z={z}) out of range"
                )));
            }
            check_p(p, "observation")?;
            obs_rows.entry((u, j)).or_default().push((z, p));
        }
        for ((u, j), row) in obs_rows.iter_mut() {
            crate::pomdp::belief::merge_sorted(row);
            let what = format!("observation row (j={j}, u={u})");
            normalize_row(row, self.renormalize, &what)?;
        }

        let mut cost_map: HashMap<(usize, usize, usize), f64> = HashMap::new();
        for &(i, u, j, g) in &self.costs {
            if i >= n || u >= nu || j >= n {
                return Err(Error::InvalidModel(format!(
                    "cost entry (i={i}, u={u}, j={j}) out of range"
                )));
            }
            if !g.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "cost g({i},{u},{j}) = {g} is not finite"
                )));
            }
            if cost_map.insert((i, u, j), g).is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate cost entry (i={i}, u={u}, j={j})"
                )));
            }
        }

        // per control: per state: [(j, z or none, p)]
        let mut rows: Vec<Vec<Vec<(usize, Option<usize>, f64)>>> = vec![vec![Vec::new(); n]; nu];
        for &(u, i, j, p, z) in &self.transitions {
            if u >= nu || i >= n || j >= n {
                return Err(Error::InvalidModel(format!(
                    "transition entry (u={u}, i={i}, j={j}) out of range"
                )));
            }
            if let Some(z) = z {
                if z >= nz {
                    return Err(Error::InvalidModel(format!(
                        "transition observation {z} out of range"
                    )));
                }
            }
            check_p(p, "transition")?;
            rows[u][i].push((j, z, p));
        }

        let mut tables = Vec::with_capacity(nu);
        let mut expected_cost = vec![vec![0.0; n]; nu];
        for (u, per_state) in rows.into_iter().enumerate() {
            let mut offsets = Vec::with_capacity(n + 1);
            let mut outcomes = Vec::new();
            offsets.push(0);
            for (i, mut row) in per_state.into_iter().enumerate() {
                row.sort_by_key(|e| (e.0, e.1));
                let mut merged: Vec<(usize, Option<usize>, f64)> = Vec::with_capacity(row.len());
                for e in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                        _ => merged.push(e),
                    }
                }
                let total: f64 = merged.iter().map(|e| e.2).sum();
                let what = format!("transition row (i={i}, u={u})");
                let scale = row_scale(total, self.renormalize, &what)?;
                let mut row_outcomes = Vec::new();
                for (j, z, p) in merged {
                    let p = p * scale;
                    if p == 0.0 {
                        continue;
                    }
                    let g = cost_map.get(&(i, u, j)).copied().unwrap_or(0.0);
                    match z {
                        Some(z) => row_outcomes.push(Outcome {
                            next: j,
                            observation: z,
                            prob: p,
                            cost: g,
                        }),
                        None => {
                            let obs = obs_rows.get(&(u, j)).ok_or_else(|| {
                                Error::InvalidModel(format!(
                                    "no observation distribution for arrival in state {j} under control {u}"
                                ))
                            })?;
                            for &(z, pz) in obs {
                                if pz > 0.0 {
                                    row_outcomes.push(Outcome {
                                        next: j,
                                        observation: z,
                                        prob: p * pz,
                                        cost: g,
                                    });
                                }
                            }
                        }
                    }
                }
                row_outcomes.sort_by_key(|o| (o.next, o.observation));
                let mut dedup: Vec<Outcome> = Vec::with_capacity(row_outcomes.len());
                for o in row_outcomes {
                    match dedup.last_mut() {
                        Some(last) if last.next == o.next && last.observation == o.observation => {
                            last.prob += o.prob
                        }
                        _ => dedup.push(o),
                    }
                }
                expected_cost[u][i] = dedup.iter().map(|o| o.prob * o.cost).sum();
                outcomes.extend(dedup);
                offsets.push(outcomes.len());
            }
            tables.push(OutcomeTable { offsets, outcomes });
        }

        Ok(TabularPomdp {
            n,
            controls: self.controls.clone(),
            observations: self.observations.clone(),
            discount: self.discount,
            tables,
            expected_cost,
        })
    }
}

fn row_scale(total: f64, renormalize: bool, what: &str) -> Result<f64> {
    if (total - 1.0).abs() <= PROBABILITY_TOLERANCE {
        return Ok(1.0);
    }
    if renormalize && total > 0.0 && (total - 1.0).abs() <= RENORMALIZE_LIMIT {
        return Ok(1.0 / total);
    }
    Err(Error::InvalidModel(format!(
        "{what} sums to {total}, expected 1"
    )))
}

fn normalize_row(row: &mut [(usize, f64)], renormalize: bool, what: &str) -> Result<()> {
    let total: f64 = row.iter().map(|e| e.1).sum();
    let scale = row_scale(total, renormalize, what)?;
    for e in row.iter_mut() {
        e.1 *= scale;
    }
    Ok(())
}
