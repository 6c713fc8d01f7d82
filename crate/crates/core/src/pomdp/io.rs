//! JSON problem file format.
//!
//! ```json
//! {
//!   "n": 2, "controls": ["stay"], "observations": ["z"], "discount": 0.9,
//!   "transitions": [{"u": 0, "entries": [[0, 0, 1.0], [1, 1, 1.0]]}],
//!   "observation_model": [{"u": 0, "entries": [[0, 0, 1.0], [1, 0, 1.0]]}],
//!   "cost": [[0, 0, 0, 1.5]]
//! }
//! ```
//!
//! Transition entries are `[i, j, p]`, or `[i, j, p, z]` for a branch that
//! always emits observation `z` (the observation model is then not consulted
//! for that branch). Observation entries are `[j, z, p]`; cost entries are
//! `[i, u, j, g]` and default to zero. Indices are 0-based.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{PomdpBuilder, TabularPomdp};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlEntries {
    pub u: usize,
    pub entries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub controls: Vec<String>,
    pub observations: Vec<String>,
    pub discount: f64,
    pub transitions: Vec<ControlEntries>,
    #[serde(default)]
    pub observation_model: Vec<ControlEntries>,
    #[serde(default)]
    pub cost: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub renormalize: bool,
}

fn index(x: f64, what: &str) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x < usize::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(Error::InvalidModel(format!(
            "{what} index {x} is not a nonnegative integer"
        )))
    }
}

impl ProblemFile {
    pub fn into_model(&self) -> Result<TabularPomdp> {
        let mut b = PomdpBuilder::new(
            self.n,
            self.controls.clone(),
            self.observations.clone(),
            self.discount,
        );
        b.renormalize(self.renormalize);
        for block in &self.transitions {
            for e in &block.entries {
                match e.as_slice() {
                    [i, j, p] => {
                        b.transition(block.u, index(*i, "state")?, index(*j, "state")?, *p);
                    }
                    [i, j, p, z] => {
                        b.transition_observed(
                            block.u,
                            index(*i, "state")?,
                            index(*j, "state")?,
                            *p,
                            index(*z, "observation")?,
                        );
                    }
                    _ => {
                        return Err(Error::InvalidModel(format!(
                            "transition entry {e:?} must be [i, j, p] or [i, j, p, z]"
                        )))
                    }
                }
            }
        }
        for block in &self.observation_model {
            for e in &block.entries {
                let [j, z, p] = e.as_slice() else {
                    return Err(Error::InvalidModel(format!(
                        "observation entry {e:?} must be [j, z, p]"
                    )));
                };
                b.observation(block.u, index(*j, "state")?, index(*z, "observation")?, *p);
            }
        }
        for e in &self.cost {
            let [i, u, j, g] = e.as_slice() else {
                return Err(Error::InvalidModel(format!(
                    "cost entry {e:?} must be [i, u, j, g]"
                )));
            };
            b.cost(
                index(*i, "state")?,
                index(*u, "control")?,
                index(*j, "state")?,
                *g,
            );
        }
        b.build()
    }

    /// Exports a model in joint-outcome form; loading the result reproduces
    /// the same outcome table.
    pub fn from_model(model: &TabularPomdp) -> Self {
        let mut transitions = Vec::with_capacity(model.num_controls());
        let mut costs: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for u in 0..model.num_controls() {
            let mut entries = Vec::new();
            for i in 0..model.num_states() {
                for o in model.outcomes(i, u) {
                    entries.push(vec![i as f64, o.next as f64, o.prob, o.observation as f64]);
                    if o.cost != 0.0 {
                        costs.insert((i, u, o.next), o.cost);
                    }
                }
            }
            transitions.push(ControlEntries { u, entries });
        }
        Self {
            n: model.num_states(),
            controls: model.controls().to_vec(),
            observations: model.observations().to_vec(),
            discount: model.discount(),
            transitions,
            observation_model: Vec::new(),
            cost: costs
                .into_iter()
                .map(|((i, u, j), g)| vec![i as f64, u as f64, j as f64, g])
                .collect(),
            renormalize: false,
        }
    }
}

impl TabularPomdp {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(s)?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProblemFile::from_model(
            self,
        ))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::Belief;

    const TIGER_LIKE: &str = r#"{
        "n": 2, "controls": ["listen", "open"], "observations": ["left", "right"],
        "discount": 0.95,
        "transitions": [
            {"u": 0, "entries": [[0, 0, 1.0], [1, 1, 1.0]]},
            {"u": 1, "entries": [[0, 0, 0.5], [0, 1, 0.5], [1, 0, 0.5], [1, 1, 0.5]]}
        ],
        "observation_model": [
            {"u": 0, "entries": [[0, 0, 0.85], [0, 1, 0.15], [1, 0, 0.15], [1, 1, 0.85]]},
            {"u": 1, "entries": [[0, 0, 0.5], [0, 1, 0.5], [1, 0, 0.5], [1, 1, 0.5]]}
        ],
        "cost": [[0, 0, 0, 1.0], [1, 0, 1, 1.0]]
    }"#;

    #[test]
    fn loads_and_round_trips() {
        let m = TabularPomdp::from_json_str(TIGER_LIKE).unwrap();
        assert_eq!(m.num_states(), 2);
        let b = Belief::new(2, [(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(m.stage_cost(&b, 0).unwrap(), 1.0);
        let again = TabularPomdp::from_json_str(&m.to_json_string().unwrap()).unwrap();
        for u in 0..2 {
            for i in 0..2 {
                assert_eq!(m.outcomes(i, u), again.outcomes(i, u));
            }
        }
    }

    #[test]
    fn rejects_invalid_files() {
        let bad_index =
            TIGER_LIKE.replace("[0, 0, 1.0], [1, 1, 1.0]", "[0, 0, 1.0], [1, 1.5, 1.0]");
        assert!(TabularPomdp::from_json_str(&bad_index).is_err());
        let bad_sum =
            TIGER_LIKE.replace("[0, 0, 0.85], [0, 1, 0.15]", "[0, 0, 0.85], [0, 1, 0.25]");
        assert!(TabularPomdp::from_json_str(&bad_sum).is_err());
        assert!(TabularPomdp::from_json_str("{\"n\": 2}").is_err());
    }
}
