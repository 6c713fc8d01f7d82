use std::collections::HashMap;

use rayon::prelude::*;

use crate::aggregation::{enumerate_grid, grid_size, GridIndex};
use crate::error::{Error, Result};
use crate::solver::{AggregateProblem, MemberExpansion};

#[derive(Debug, Clone)]
struct Row {
    offset: f64,
    /// Per control: expected stage cost and `(target id, weight)` pairs.
    controls: Vec<(f64, Vec<(u32, f64)>)>,
}

/// The aggregate MDP over a table of representative feature beliefs, with
/// stage costs and successor weights precomputed per member.
///
/// Members are numbered in insertion order. A member is *expanded* once its
/// row is known; every target of an expanded row is itself a member.
#[derive(Debug, Clone)]
pub struct AggregateMdp {
    alpha: f64,
    members: Vec<GridIndex>,
    index: HashMap<GridIndex, u32>,
    rows: Vec<Row>,
    limit: Option<usize>,
}

impl AggregateMdp {
    fn empty(problem: &AggregateProblem<'_>, limit: Option<usize>) -> Self {
        Self {
            alpha: problem.model.discount(),
            members: Vec::new(),
            index: HashMap::new(),
            rows: Vec::new(),
            limit,
        }
    }

    /// Every grid point at the problem's resolution.
    pub fn eager(problem: &AggregateProblem<'_>, limit: Option<usize>) -> Result<Self> {
        let size = grid_size(problem.rho, problem.num_features())?;
        if limit.is_some_and(|l| size > l as u64) || size > u32::MAX as u64 {
            return Err(Error::TableLimit {
                limit: limit.unwrap_or(u32::MAX as usize),
            });
        }
        let mut mdp = Self::empty(problem, limit);
        for g in enumerate_grid(problem.rho, problem.num_features())? {
            mdp.insert(g)?;
        }
        mdp.expand_pending(problem)?;
        Ok(mdp)
    }

    /// Closure of the seeds under `psi o G`, expanded breadth first.
    pub fn lazy(
        problem: &AggregateProblem<'_>,
        seeds: &[GridIndex],
        limit: Option<usize>,
    ) -> Result<Self> {
        let mut mdp = Self::seeded(problem, seeds, limit)?;
        while mdp.expand_pending(problem)? > 0 {}
        Ok(mdp)
    }

    /// Table holding only the seeds, none of them expanded yet.
    pub fn seeded(
        problem: &AggregateProblem<'_>,
        seeds: &[GridIndex],
        limit: Option<usize>,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "lazy expansion needs at least one seed".into(),
            ));
        }
        let mut mdp = Self::empty(problem, limit);
        for g in seeds {
            if !g.is_valid_for(problem.num_features(), problem.rho) {
                return Err(Error::InvalidArgument(format!(
                    "seed {:?} is not a valid grid point",
                    g.entries()
                )));
            }
            mdp.insert(g.clone())?;
        }
        Ok(mdp)
    }

    fn insert(&mut self, g: GridIndex) -> Result<u32> {
        if let Some(&id) = self.index.get(&g) {
            return Ok(id);
        }
        if self.limit.is_some_and(|l| self.members.len() >= l) {
            return Err(Error::TableLimit {
                limit: self.limit.unwrap_or_default(),
            });
        }
        let id = self.members.len() as u32;
        self.index.insert(g.clone(), id);
        self.members.push(g);
        Ok(id)
    }

    /// Expands every member that has no row yet (in parallel), appending newly
    /// discovered targets in a deterministic order. Returns how many members
    /// were expanded.
    pub fn expand_pending(&mut self, problem: &AggregateProblem<'_>) -> Result<usize> {
        let start = self.rows.len();
        let end = self.members.len();
        if start == end {
            return Ok(0);
        }
        let expanded: Vec<MemberExpansion> = self.members[start..end]
            .par_iter()
            .map(|g| problem.expand(g))
            .collect::<Result<_>>()?;
        for e in expanded {
            let mut controls = Vec::with_capacity(e.controls.len());
            for c in e.controls {
                let mut edges = Vec::with_capacity(c.targets.len());
                for (g, w) in c.targets {
                    edges.push((self.insert(g)?, w));
                }
                edges.sort_unstable_by_key(|e| e.0);
                edges.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                controls.push((c.cost, edges));
            }
            self.rows.push(Row {
                offset: e.offset,
                controls,
            });
        }
        Ok(end - start)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_expanded(&self) -> usize {
        self.rows.len()
    }

    pub fn is_closed(&self) -> bool {
        self.rows.len() == self.members.len()
    }

    pub fn members(&self) -> &[GridIndex] {
        &self.members
    }

    pub fn id_of(&self, g: &GridIndex) -> Option<usize> {
        self.index.get(g).map(|&i| i as usize)
    }

    /// Ids of the successors of member `i` under any control.
    pub fn successors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.rows[i]
            .controls
            .iter()
            .flat_map(|c| c.1.iter().map(|e| e.0 as usize))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `(Hr)(i)` and its minimizing control (lowest index on ties).
    pub fn bellman_at(&self, i: usize, r: &[f64]) -> (f64, usize) {
        let row = &self.rows[i];
        let mut best = (f64::INFINITY, 0);
        for (u, (cost, edges)) in row.controls.iter().enumerate() {
            let future: f64 = edges.iter().map(|&(t, w)| w * r[t as usize]).sum();
            let v = cost + self.alpha * future;
            if v < best.0 {
                best = (v, u);
            }
        }
        (best.0 + row.offset, best.1)
    }

    /// `Hr` over the whole (closed) table, evaluated in parallel from the
    /// snapshot `r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        assert!(self.is_closed() && r.len() == self.len());
        (0..self.len())
            .into_par_iter()
            .map(|i| self.bellman_at(i, r).0)
            .collect()
    }

    /// `||Hr - r||_inf`.
    pub fn bellman_residual(&self, r: &[f64]) -> f64 {
        self.apply(r)
            .iter()
            .zip(r)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Jacobi value iteration from `r0` until successive iterates differ by
    /// less than `tolerance` in sup-norm or `max_sweeps` is reached.
    pub fn iterate_sync(&self, r0: Vec<f64>, tolerance: f64, max_sweeps: usize) -> Sweeps {
        let mut r = r0;
        let mut history = Vec::new();
        for sweep in 1..=max_sweeps {
            let next = self.apply(&r);
            let delta = next
                .iter()
                .zip(&r)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            r = next;
            history.push(delta);
            if delta < tolerance {
                return Sweeps {
                    values: r,
                    sweeps: sweep,
                    converged: true,
                    history,
                };
            }
        }
        Sweeps {
            values: r,
            sweeps: max_sweeps,
            converged: false,
            history,
        }
    }

    /// Gauss-Seidel value iteration in table order, expanding newly discovered
    /// members as the sweep reaches them. Stops after a full sweep in which no
    /// component moved by more than `tolerance` and no member was added.
    pub fn iterate_async(
        &mut self,
        problem: &AggregateProblem<'_>,
        mut r: Vec<f64>,
        tolerance: f64,
        max_sweeps: usize,
    ) -> Result<Sweeps> {
        let mut history = Vec::new();
        for sweep in 1..=max_sweeps {
            let size_before = self.len();
            let mut delta = 0.0f64;
            let mut i = 0;
            while i < self.len() {
                if i >= self.num_expanded() {
                    self.expand_pending(problem)?;
                }
                r.resize(self.len(), 0.0);
                let v = self.bellman_at(i, &r).0;
                delta = delta.max((v - r[i]).abs());
                r[i] = v;
                i += 1;
            }
            history.push(delta);
            if delta <= tolerance && self.len() == size_before {
                return Ok(Sweeps {
                    values: r,
                    sweeps: sweep,
                    converged: true,
                    history,
                });
            }
        }
        Ok(Sweeps {
            values: r,
            sweeps: max_sweeps,
            converged: false,
            history,
        })
    }
}

/// Outcome of a value-iteration run.
#[derive(Debug, Clone)]
pub struct Sweeps {
    pub values: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Sup-norm change of each sweep.
    pub history: Vec<f64>,
}
