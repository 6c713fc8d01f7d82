//! Exact belief calculus: expected stage cost, observation probabilities and
//! the Bayes belief estimator.

use crate::error::{Error, Result};
use crate::pomdp::belief::merge_sorted;
use crate::pomdp::{Belief, TabularPomdp};

/// One observation branch of a control applied at a belief.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub observation: usize,
    pub prob: f64,
    pub belief: Belief,
}

impl TabularPomdp {
    fn check_belief(&self, b: &Belief) -> Result<()> {
        if b.dim() != self.num_states() {
            return Err(Error::InvalidArgument(format!(
                "belief over {} states, model has {}",
                b.dim(),
                self.num_states()
            )));
        }
        Ok(())
    }

    /// `sum_i b(i) sum_j p_ij(u) g(i, u, j)`.
    pub fn stage_cost(&self, b: &Belief, u: usize) -> Result<f64> {
        self.check_control(u)?;
        self.check_belief(b)?;
        Ok(b.entries()
            .iter()
            .map(|&(i, w)| w * self.expected_cost(i, u))
            .sum())
    }

    /// `sum_i b(i) sum_j p_ij(u) p(z | j, u)`.
    pub fn observation_prob(&self, b: &Belief, u: usize, z: usize) -> Result<f64> {
        self.check_control(u)?;
        self.check_observation(z)?;
        self.check_belief(b)?;
        let mut acc = 0.0;
        for &(i, w) in b.entries() {
            for o in self.outcomes(i, u) {
                if o.observation == z {
                    acc += w * o.prob;
                }
            }
        }
        Ok(acc)
    }

    /// Dense distribution of the next observation.
    pub fn observation_distribution(&self, b: &Belief, u: usize) -> Result<Vec<f64>> {
        self.check_control(u)?;
        self.check_belief(b)?;
        let mut dist = vec![0.0; self.num_observations()];
        for &(i, w) in b.entries() {
            for o in self.outcomes(i, u) {
                dist[o.observation] += w * o.prob;
            }
        }
        Ok(dist)
    }

    /// One-step predicted belief `sum_i b(i) p_i.(u)`, before observing.
    pub fn predict(&self, b: &Belief, u: usize) -> Result<Belief> {
        self.check_control(u)?;
        self.check_belief(b)?;
        let mut raw = Vec::new();
        for &(i, w) in b.entries() {
            for o in self.outcomes(i, u) {
                raw.push((o.next, w * o.prob));
            }
        }
        merge_sorted(&mut raw);
        let total: f64 = raw.iter().map(|e| e.1).sum();
        for e in raw.iter_mut() {
            e.1 /= total;
        }
        raw.retain(|e| e.1 > 0.0);
        Ok(Belief::from_sorted_unchecked(self.num_states(), raw))
    }

    /// Bayes update `F(b, u, z)`.
    pub fn belief_update(&self, b: &Belief, u: usize, z: usize) -> Result<Belief> {
        self.check_control(u)?;
        self.check_observation(z)?;
        self.check_belief(b)?;
        let mut raw = Vec::new();
        for &(i, w) in b.entries() {
            for o in self.outcomes(i, u) {
                if o.observation == z {
                    raw.push((o.next, w * o.prob));
                }
            }
        }
        Belief::from_mass(self.num_states(), raw).ok_or(Error::ImpossibleObservation {
            control: u,
            observation: z,
        })
    }

    /// All observation branches with positive probability, in observation
    /// order. Cheaper than calling [`observation_prob`](Self::observation_prob)
    /// and [`belief_update`](Self::belief_update) once per observation.
    pub fn branches(&self, b: &Belief, u: usize) -> Result<Vec<Branch>> {
        self.check_control(u)?;
        self.check_belief(b)?;
        let mut raw: Vec<(usize, usize, f64)> = Vec::new();
        for &(i, w) in b.entries() {
            for o in self.outcomes(i, u) {
                raw.push((o.observation, o.next, w * o.prob));
            }
        }
        raw.sort_unstable_by_key(|e| (e.0, e.1));
        let mut out = Vec::new();
        let mut start = 0;
        while start < raw.len() {
            let z = raw[start].0;
            let mut end = start;
            while end < raw.len() && raw[end].0 == z {
                end += 1;
            }
            let prob: f64 = raw[start..end].iter().map(|e| e.2).sum();
            if prob > 0.0 {
                let mass: Vec<(usize, f64)> = raw[start..end].iter().map(|e| (e.1, e.2)).collect();
                if let Some(belief) = Belief::from_mass(self.num_states(), mass) {
                    out.push(Branch {
                        observation: z,
                        prob,
                        belief,
                    });
                }
            }
            start = end;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::PomdpBuilder;

    fn names(k: usize, p: &str) -> Vec<String> {
        (0..k).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn degenerate_stage_cost() {
        let mut b = PomdpBuilder::new(2, names(1, "u"), names(1, "z"), 0.9);
        b.transition(0, 0, 1, 1.0).transition(0, 1, 1, 1.0);
        b.observation(0, 1, 0, 1.0);
        b.cost(0, 0, 1, 5.0);
        let m = b.build().unwrap();
        assert_eq!(m.stage_cost(&Belief::point(2, 0), 0).unwrap(), 5.0);
        assert!(m.stage_cost(&Belief::point(2, 0), 1).is_err());
        // single observation alphabet
        assert_eq!(m.observation_prob(&Belief::point(2, 0), 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn convex_in_belief_for_identical_rows() {
        let mut b = PomdpBuilder::new(3, names(1, "u"), names(1, "z"), 0.9);
        for i in 0..2 {
            b.transition(0, i, 2, 1.0).cost(i, 0, 2, 3.5);
        }
        b.transition(0, 2, 2, 1.0).observation(0, 2, 0, 1.0);
        let m = b.build().unwrap();
        let mix = Belief::new(3, [(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(
            m.stage_cost(&mix, 0).unwrap(),
            m.stage_cost(&Belief::point(3, 0), 0).unwrap()
        );
    }

    #[test]
    fn noisy_and_noiseless_observation() {
        let mut b = PomdpBuilder::new(2, names(1, "u"), names(2, "z"), 0.9);
        b.transition(0, 0, 1, 1.0).transition(0, 1, 0, 1.0);
        b.observation(0, 1, 0, 0.7).observation(0, 1, 1, 0.3);
        b.observation(0, 0, 1, 1.0);
        let m = b.build().unwrap();
        let d = Belief::point(2, 0);
        assert!((m.observation_prob(&d, 0, 0).unwrap() - 0.7).abs() < 1e-15);
        let half = Belief::new(2, [(0, 0.5), (1, 0.5)]).unwrap();
        // z = 0 is only emitted on arrival in state 1
        assert_eq!(m.belief_update(&half, 0, 0).unwrap(), Belief::point(2, 1));
        assert!(matches!(
            m.belief_update(&Belief::point(2, 1), 0, 0),
            Err(Error::ImpossibleObservation { .. })
        ));
    }

    #[test]
    fn branches_cover_distribution() {
        let mut b = PomdpBuilder::new(2, names(1, "u"), names(2, "z"), 0.9);
        b.transition(0, 0, 0, 0.4)
            .transition(0, 0, 1, 0.6)
            .transition(0, 1, 1, 1.0);
        b.observation(0, 0, 0, 0.9).observation(0, 0, 1, 0.1);
        b.observation(0, 1, 0, 0.2).observation(0, 1, 1, 0.8);
        let m = b.build().unwrap();
        let bel = Belief::new(2, [(0, 0.3), (1, 0.7)]).unwrap();
        let br = m.branches(&bel, 0).unwrap();
        let dist = m.observation_distribution(&bel, 0).unwrap();
        assert_eq!(br.len(), 2);
        for x in &br {
            assert!((x.prob - dist[x.observation]).abs() < 1e-15);
            assert_eq!(x.belief, m.belief_update(&bel, 0, x.observation).unwrap());
        }
        let pred = m.predict(&bel, 0).unwrap();
        assert!((pred.get(0) - 0.12).abs() < 1e-15);
    }
}
