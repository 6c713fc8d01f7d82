use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aggregation::{FeatureBelief, GridIndex};
use crate::error::{Error, Result};
use crate::pomdp::belief::merge_sorted;
use crate::pomdp::{Belief, TabularPomdp};

/// Tolerance used when checking that `d` and `phi` rows are distributions.
pub const SCHEME_TOLERANCE: f64 = 1e-12;

/// A feature state `x` with its member set `I_x` and disaggregation
/// distribution `d_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub members: Vec<usize>,
    pub disagg: Vec<(usize, f64)>,
}

impl Feature {
    /// Feature whose disaggregation is uniform over its members.
    pub fn uniform(name: impl Into<String>, members: Vec<usize>) -> Self {
        let w = 1.0 / members.len().max(1) as f64;
        let disagg = members.iter().map(|&i| (i, w)).collect();
        Self {
            name: name.into(),
            members,
            disagg,
        }
    }

    /// Feature whose disaggregation puts all mass on `state`.
    pub fn concentrated(name: impl Into<String>, members: Vec<usize>, state: usize) -> Self {
        Self {
            name: name.into(),
            members,
            disagg: vec![(state, 1.0)],
        }
    }
}

/// A violated feature-scheme invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeViolation {
    NoFeatures,
    StateOutOfRange {
        feature: usize,
        state: usize,
    },
    Overlap {
        state: usize,
        first: usize,
        second: usize,
    },
    NegativeWeight {
        feature: usize,
        state: usize,
    },
    DisaggOutsideMembers {
        feature: usize,
        state: usize,
    },
    DisaggNotNormalized {
        feature: usize,
        sum: f64,
    },
    PhiFeatureOutOfRange {
        state: usize,
        feature: usize,
    },
    PhiNotDeterministic {
        state: usize,
        feature: usize,
        weight: f64,
    },
    PhiNotNormalized {
        state: usize,
        sum: f64,
    },
}

impl fmt::Display for SchemeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SchemeViolation::*;
        match self {
            NoFeatures => write!(f, "scheme has no features"),
            StateOutOfRange { feature, state } => {
                write!(f, "feature {feature} references state {state} out of range")
            }
            Overlap {
                state,
                first,
                second,
            } => {
                write!(
                    f,
                    "state {state} belongs to both feature {first} and feature {second}"
                )
            }
            NegativeWeight { feature, state } => {
                write!(
                    f,
                    "feature {feature} has a negative weight on state {state}"
                )
            }
            DisaggOutsideMembers { feature, state } => write!(
                f,
                "feature {feature} disaggregates onto state {state}, which is not a member"
            ),
            DisaggNotNormalized { feature, sum } => {
                write!(f, "disaggregation of feature {feature} sums to {sum}")
            }
            PhiFeatureOutOfRange { state, feature } => {
                write!(
                    f,
                    "aggregation row of state {state} references feature {feature}"
                )
            }
            PhiNotDeterministic {
                state,
                feature,
                weight,
            } => write!(
                f,
                "state {state} is a member of feature {feature} but phi = {weight} there"
            ),
            PhiNotNormalized { state, sum } => {
                write!(f, "aggregation row of state {state} sums to {sum}")
            }
        }
    }
}

/// Feature space with disaggregation (`d`) and aggregation (`phi`)
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScheme {
    n: usize,
    features: Vec<Feature>,
    phi: Vec<Vec<(usize, f64)>>,
}

impl FeatureScheme {
    /// Builds and validates a scheme. Rows of `phi` not mentioned in
    /// `phi_entries` default to the deterministic assignment of a state to the
    /// unique feature containing it.
    pub fn new(
        n: usize,
        features: Vec<Feature>,
        phi_entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let scheme = Self::from_parts(n, features, phi_entries);
        let violations = scheme.validate();
        if violations.is_empty() {
            Ok(scheme)
        } else {
            Err(Error::InvalidScheme(violations))
        }
    }

    /// Builds without validation; use [`validate`](Self::validate) to list
    /// violated invariants.
    pub fn from_parts(
        n: usize,
        mut features: Vec<Feature>,
        phi_entries: &[(usize, usize, f64)],
    ) -> Self {
        let mut owner: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (x, f) in features.iter_mut().enumerate() {
            f.members.sort_unstable();
            f.members.dedup();
            merge_sorted(&mut f.disagg);
            for &i in &f.members {
                if i < n {
                    owner[i].push(x);
                }
            }
        }
        let mut phi: Vec<Vec<(usize, f64)>> = owner
            .iter()
            .map(|o| {
                if o.len() == 1 {
                    vec![(o[0], 1.0)]
                } else {
                    Vec::new()
                }
            })
            .collect();
        let explicit: BTreeSet<usize> =
            phi_entries.iter().map(|e| e.0).filter(|&j| j < n).collect();
        for &j in &explicit {
            phi[j].clear();
        }
        for &(j, y, w) in phi_entries {
            if j < n {
                phi[j].push((y, w));
            }
        }
        for row in phi.iter_mut() {
            merge_sorted(row);
        }
        Self { n, features, phi }
    }

    /// Identity scheme: one feature per state (`F = X`).
    pub fn flat(n: usize) -> Self {
        let features = (0..n)
            .map(|i| Feature {
                name: format!("s{i}"),
                members: vec![i],
                disagg: vec![(i, 1.0)],
            })
            .collect();
        let phi = (0..n).map(|i| vec![(i, 1.0)]).collect();
        Self { n, features, phi }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn phi_row(&self, j: usize) -> &[(usize, f64)] {
        &self.phi[j]
    }

    /// True when every feature is a single state with `d` and `phi` the identity.
    pub fn is_flat(&self) -> bool {
        self.features.len() == self.n
            && self
                .features
                .iter()
                .enumerate()
                .all(|(x, f)| f.members == [x] && f.disagg.len() == 1 && f.disagg[0].0 == x)
            && self
                .phi
                .iter()
                .enumerate()
                .all(|(j, r)| r.len() == 1 && r[0].0 == j)
    }

    /// Lists every violated invariant; empty means the scheme is valid.
    pub fn validate(&self) -> Vec<SchemeViolation> {
        let mut out = Vec::new();
        let k = self.features.len();
        if k == 0 {
            out.push(SchemeViolation::NoFeatures);
        }
        let mut owner: Vec<Option<usize>> = vec![None; self.n];
        for (x, f) in self.features.iter().enumerate() {
            for &i in &f.members {
                if i >= self.n {
                    out.push(SchemeViolation::StateOutOfRange {
                        feature: x,
                        state: i,
                    });
                    continue;
                }
                match owner[i] {
                    Some(first) => out.push(SchemeViolation::Overlap {
                        state: i,
                        first,
                        second: x,
                    }),
                    None => owner[i] = Some(x),
                }
            }
            let mut sum = 0.0;
            for &(i, w) in &f.disagg {
                if i >= self.n {
                    out.push(SchemeViolation::StateOutOfRange {
                        feature: x,
                        state: i,
                    });
                    continue;
                }
                if w < 0.0 {
                    out.push(SchemeViolation::NegativeWeight {
                        feature: x,
                        state: i,
                    });
                }
                if w != 0.0 && f.members.binary_search(&i).is_err() {
                    out.push(SchemeViolation::DisaggOutsideMembers {
                        feature: x,
                        state: i,
                    });
                }
                sum += w;
            }
            if (sum - 1.0).abs() > SCHEME_TOLERANCE {
                out.push(SchemeViolation::DisaggNotNormalized { feature: x, sum });
            }
        }
        for (j, row) in self.phi.iter().enumerate() {
            let mut sum = 0.0;
            for &(y, w) in row {
                if y >= k {
                    out.push(SchemeViolation::PhiFeatureOutOfRange {
                        state: j,
                        feature: y,
                    });
                }
                sum += w;
            }
            if let Some(y) = owner[j] {
                let w = row.iter().find(|e| e.0 == y).map_or(0.0, |e| e.1);
                if (w - 1.0).abs() > SCHEME_TOLERANCE {
                    out.push(SchemeViolation::PhiNotDeterministic {
                        state: j,
                        feature: y,
                        weight: w,
                    });
                }
            }
            if (sum - 1.0).abs() > SCHEME_TOLERANCE {
                out.push(SchemeViolation::PhiNotNormalized { state: j, sum });
            }
        }
        out
    }

    /// `D(q)`: belief obtained by disaggregating the grid point `q`.
    pub fn disaggregate(&self, q: &GridIndex) -> Result<Belief> {
        if let Some(x) = q.max_feature() {
            if x >= self.features.len() {
                return Err(Error::InvalidArgument(format!(
                    "grid point references feature {x}, scheme has {}",
                    self.features.len()
                )));
            }
        }
        let rho = q.resolution() as f64;
        let mut raw = Vec::new();
        for &(x, delta) in q.entries() {
            let share = delta as f64 / rho;
            for &(i, d) in &self.features[x as usize].disagg {
                raw.push((i, share * d));
            }
        }
        Belief::from_mass(self.n, raw)
            .ok_or_else(|| Error::InvalidArgument("grid point disaggregates to zero mass".into()))
    }

    /// `q^T D` for an arbitrary feature belief.
    pub fn disaggregate_features(&self, q: &FeatureBelief) -> Result<Belief> {
        if q.dim() != self.features.len() {
            return Err(Error::InvalidArgument(
                "feature belief dimension mismatch".into(),
            ));
        }
        let mut raw = Vec::new();
        for &(x, qx) in q.entries() {
            for &(i, d) in &self.features[x].disagg {
                raw.push((i, qx * d));
            }
        }
        Belief::from_mass(self.n, raw).ok_or_else(|| {
            Error::InvalidArgument("feature belief disaggregates to zero mass".into())
        })
    }

    /// `Phi(b)`: feature belief `q(y) = sum_j b(j) phi_jy`.
    pub fn aggregate(&self, b: &Belief) -> Result<FeatureBelief> {
        if b.dim() != self.n {
            return Err(Error::InvalidArgument(format!(
                "belief over {} states, scheme covers {}",
                b.dim(),
                self.n
            )));
        }
        let mut raw = Vec::new();
        for &(j, w) in b.entries() {
            for &(y, p) in &self.phi[j] {
                raw.push((y, w * p));
            }
        }
        merge_sorted(&mut raw);
        raw.retain(|e| e.1 > 0.0);
        Ok(FeatureBelief::from_sorted_unchecked(
            self.features.len(),
            raw,
        ))
    }

    /// `X-hat`: member states plus their one-step successors under any control.
    pub fn reachable_states(&self, model: &TabularPomdp) -> Vec<usize> {
        let mut set: BTreeSet<usize> = BTreeSet::new();
        for f in &self.features {
            set.extend(f.members.iter().copied().filter(|&i| i < self.n));
        }
        let members: Vec<usize> = set.iter().copied().collect();
        for i in members {
            for u in 0..model.num_controls() {
                set.extend(
                    model
                        .outcomes(i, u)
                        .iter()
                        .filter(|o| o.prob > 0.0)
                        .map(|o| o.next),
                );
            }
        }
        set.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_feature_scheme() -> FeatureScheme {
        FeatureScheme::new(
            8,
            vec![
                Feature::uniform("a", vec![2, 5]),
                Feature {
                    name: "b".into(),
                    members: vec![0, 1, 3, 4, 6, 7],
                    disagg: vec![(7, 1.0)],
                },
            ],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn one_hot_disaggregation() {
        let s = two_feature_scheme();
        let b = s.disaggregate(&GridIndex::unit(3, 0)).unwrap();
        assert_eq!(b.entries(), &[(2, 0.5), (5, 0.5)]);
    }

    #[test]
    fn deterministic_disaggregation() {
        let s = FeatureScheme::new(
            8,
            vec![
                Feature {
                    name: "a".into(),
                    members: vec![0, 1, 2, 3],
                    disagg: vec![(0, 1.0)],
                },
                Feature {
                    name: "b".into(),
                    members: vec![4, 5, 6, 7],
                    disagg: vec![(7, 1.0)],
                },
            ],
            &[],
        )
        .unwrap();
        let b = s
            .disaggregate(&GridIndex::new(2, &[1, 1]).unwrap())
            .unwrap();
        assert_eq!(b.entries(), &[(0, 0.5), (7, 0.5)]);
    }

    #[test]
    fn aggregation_of_point_mass_is_one_hot() {
        let s = two_feature_scheme();
        let q = s.aggregate(&Belief::point(8, 5)).unwrap();
        assert_eq!(q.entries(), &[(0, 1.0)]);
    }

    #[test]
    fn reports_overlap_and_support_violations() {
        let s = FeatureScheme::from_parts(
            3,
            vec![
                Feature::uniform("a", vec![0, 1]),
                Feature {
                    name: "b".into(),
                    members: vec![1, 2],
                    disagg: vec![(0, 1.0)],
                },
            ],
            &[],
        );
        let v = s.validate();
        assert!(v
            .iter()
            .any(|x| matches!(x, SchemeViolation::Overlap { state: 1, .. })));
        assert!(v.iter().any(|x| matches!(
            x,
            SchemeViolation::DisaggOutsideMembers {
                feature: 1,
                state: 0
            }
        )));
        assert!(matches!(
            FeatureScheme::new(3, vec![Feature::uniform("a", vec![0, 1])], &[]),
            Err(Error::InvalidScheme(_))
        ));
    }

    #[test]
    fn uncovered_states_use_explicit_phi() {
        let s = FeatureScheme::new(
            3,
            vec![
                Feature::uniform("a", vec![0]),
                Feature::uniform("b", vec![1]),
            ],
            &[(2, 0, 0.25), (2, 1, 0.75)],
        )
        .unwrap();
        let q = s.aggregate(&Belief::point(3, 2)).unwrap();
        assert_eq!(q.entries(), &[(0, 0.25), (1, 0.75)]);
        assert!(!s.is_flat());
        assert!(FeatureScheme::flat(3).is_flat());
    }
}
