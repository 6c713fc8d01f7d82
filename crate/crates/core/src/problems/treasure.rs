//! Treasure hunting: `N` sites, each holding a treasure or not. Searching a
//! site costs `c` and finds its treasure (worth `v`) with probability `beta`;
//! the search can be abandoned at any time.
//!
//! State `s < 2^N` is the bitmask of sites still holding a treasure (bit
//! `l - 1` for site `l`); state `2^N` is the terminal state `t`.

use std::collections::HashMap;
use std::str::FromStr;

use crate::aggregation::{Feature, FeatureScheme};
use crate::error::{Error, Result};
use crate::pomdp::{Belief, PomdpBuilder, TabularPomdp};

/// Treasure values of the ten reference sites.
pub const REFERENCE_VALUES: [f64; 10] =
    [6.48, 5.22, 5.43, 7.58, 3.09, 3.76, 8.01, 8.53, 7.86, 8.20];
/// Search costs of the ten reference sites.
pub const REFERENCE_COSTS: [f64; 10] = [0.55, 0.86, 0.58, 0.86, 0.50, 0.98, 0.85, 0.74, 0.58, 0.84];
/// Detection probabilities of the ten reference sites.
pub const REFERENCE_DETECTION: [f64; 10] =
    [0.13, 0.78, 0.11, 0.68, 0.11, 0.10, 0.30, 0.73, 0.54, 0.45];
pub const REFERENCE_DISCOUNT: f64 = 0.99;

/// Largest supported site count (the state space has `2^N + 1` states).
pub const MAX_SITES: usize = 20;

pub const SUCCESS: usize = 0;
pub const FAILURE: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TreasureSpec {
    pub values: Vec<f64>,
    pub costs: Vec<f64>,
    pub detection: Vec<f64>,
    pub discount: f64,
}

impl TreasureSpec {
    /// The first `sites` entries of the reference data.
    pub fn reference(sites: usize) -> Result<Self> {
        if sites == 0 || sites > REFERENCE_VALUES.len() {
            return Err(Error::InvalidArgument(format!(
                "reference data covers 1 to {} sites, got {sites}",
                REFERENCE_VALUES.len()
            )));
        }
        Ok(Self {
            values: REFERENCE_VALUES[..sites].to_vec(),
            costs: REFERENCE_COSTS[..sites].to_vec(),
            detection: REFERENCE_DETECTION[..sites].to_vec(),
            discount: REFERENCE_DISCOUNT,
        })
    }

    pub fn sites(&self) -> usize {
        self.values.len()
    }

    pub fn num_states(&self) -> usize {
        (1 << self.sites()) + 1
    }

    pub fn terminal(&self) -> usize {
        1 << self.sites()
    }

    pub fn terminate_control(&self) -> usize {
        self.sites()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sites();
        if n == 0 || n > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "site count must be in 1..={MAX_SITES}, got {n}"
            )));
        }
        if self.costs.len() != n || self.detection.len() != n {
            return Err(Error::InvalidArgument(
                "values, costs and detection must have equal length".into(),
            ));
        }
        if self.detection.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
            return Err(Error::InvalidArgument(
                "detection probabilities must lie in (0, 1]".into(),
            ));
        }
        if self.costs.iter().any(|&c| !(c > 0.0) || !c.is_finite())
            || self.values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "search costs must be positive and values finite".into(),
            ));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidArgument("discount must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// State index for the given presence pattern (`present[l]` for site `l + 1`).
    pub fn state(&self, present: &[bool]) -> usize {
        present
            .iter()
            .enumerate()
            .filter(|e| *e.1)
            .map(|(l, _)| 1 << l)
            .sum()
    }

    /// Belief under which site `l + 1` independently holds a treasure with
    /// probability `probs[l]`.
    pub fn product_belief(&self, probs: &[f64]) -> Result<Belief> {
        if probs.len() != self.sites() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(
                "one probability in [0, 1] per site expected".into(),
            ));
        }
        let entries = (0..1usize << self.sites()).map(|s| {
            let w: f64 = probs
                .iter()
                .enumerate()
                .map(|(l, &p)| if s >> l & 1 == 1 { p } else { 1.0 - p })
                .product();
            (s, w)
        });
        Belief::new(self.num_states(), entries)
    }

    /// Belief that every site holds a treasure.
    pub fn all_present(&self) -> Belief {
        Belief::point(self.num_states(), (1 << self.sites()) - 1)
    }
}

/// Builds the POMDP. Searching in the terminal state costs the search cost
/// and leaves it unchanged, so that `t` behaves exactly like the state with
/// no treasure left; terminating is free and leads to `t`.
pub fn build_treasure(spec: &TreasureSpec) -> Result<TabularPomdp> {
    spec.validate()?;
    let n = spec.sites();
    let mut controls: Vec<String> = (1..=n).map(|l| format!("search {l}")).collect();
    controls.push("terminate".into());
    let mut b = PomdpBuilder::new(
        spec.num_states(),
        controls,
        vec!["success".into(), "failure".into()],
        spec.discount,
    );
    let t = spec.terminal();
    for l in 0..n {
        let (v, c, beta) = (spec.values[l], spec.costs[l], spec.detection[l]);
        for s in 0..=t {
            if s != t && s >> l & 1 == 1 {
                let cleared = s & !(1 << l);
                b.transition_observed(l, s, cleared, beta, SUCCESS)
                    .cost(s, l, cleared, c - v);
                if beta < 1.0 {
                    b.transition_observed(l, s, s, 1.0 - beta, FAILURE)
                        .cost(s, l, s, c);
                }
            } else {
                b.transition_observed(l, s, s, 1.0, FAILURE)
                    .cost(s, l, s, c);
            }
        }
    }
    for s in 0..=t {
        b.transition_observed(n, s, t, 1.0, FAILURE);
    }
    b.build()
}

/// Feature constructions for the treasure problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreasureFeatures {
    /// Feature `l` is "site `l` is the most valuable site still holding a
    /// treasure"; feature 0 covers the empty state and `t`. Disaggregation
    /// is uniform over each feature's members.
    ///
    /// A belief rebuilt from feature `l` puts fresh mass on the less valuable
    /// sites after every search there, so the aggregate problem can collect
    /// the same lesser treasure over and over.
    MaxValue,
    /// Same partition, but feature `l` disaggregates onto the state where
    /// only site `l` holds a treasure. No treasure reappears; the less
    /// valuable sites are valued at zero instead.
    MaxValueSingle,
    /// Sites split into `L` contiguous groups; a feature is the vector of
    /// group indicators "some site of the group holds a treasure", plus a
    /// separate terminal feature.
    Grouped(usize),
    /// One feature per state.
    Flat,
}

impl FromStr for TreasureFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-value" => Ok(Self::MaxValue),
            "max-value-single" => Ok(Self::MaxValueSingle),
            "flat" | "identity" => Ok(Self::Flat),
            _ => match s.strip_prefix("grouped:") {
                Some(l) => l
                    .parse()
                    .map(Self::Grouped)
                    .map_err(|_| Error::InvalidArgument(format!("bad group count in '{s}'"))),
                None => Err(Error::InvalidArgument(format!(
                    "unknown treasure features '{s}' (expected max-value, max-value-single, grouped:L or flat)"
                ))),
            },
        }
    }
}

pub fn treasure_feature_scheme(
    spec: &TreasureSpec,
    mode: TreasureFeatures,
) -> Result<FeatureScheme> {
    spec.validate()?;
    let n = spec.sites();
    let t = spec.terminal();
    match mode {
        TreasureFeatures::Flat => Ok(FeatureScheme::flat(spec.num_states())),
        TreasureFeatures::MaxValue | TreasureFeatures::MaxValueSingle => {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
            members[0].push(0);
            for s in 1..t {
                let best = (0..n)
                    .filter(|&l| s >> l & 1 == 1)
                    .reduce(|a, l| {
                        if spec.values[l] > spec.values[a] {
                            l
                        } else {
                            a
                        }
                    })
                    .expect("nonempty state");
                members[best + 1].push(s);
            }
            members[0].push(t);
            let features = members
                .into_iter()
                .enumerate()
                .map(|(x, m)| {
                    let name = if x == 0 {
                        "none".to_string()
                    } else {
                        format!("site {x}")
                    };
                    if x == 0 || mode == TreasureFeatures::MaxValue {
                        Feature::uniform(name, m)
                    } else {
                        Feature::concentrated(name, m, 1 << (x - 1))
                    }
                })
                .collect();
            FeatureScheme::new(spec.num_states(), features, &[])
        }
        TreasureFeatures::Grouped(groups) => {
            if groups == 0 || !n.is_multiple_of(groups) || groups > 16 {
                return Err(Error::InvalidArgument(format!(
                    "group count {groups} must divide the site count {n}"
                )));
            }
            let width = n / groups;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); (1 << groups) + 1];
            for s in 0..t {
                let x: usize = (0..groups)
                    .filter(|g| (s >> (g * width)) & ((1 << width) - 1) != 0)
                    .map(|g| 1 << g)
                    .sum();
                members[x].push(s);
            }
            members[1 << groups].push(t);
            let features = members
                .into_iter()
                .enumerate()
                .map(|(x, m)| {
                    let name = if x == 1 << groups {
                        "terminal".to_string()
                    } else {
                        (0..groups)
                            .map(|g| if x >> g & 1 == 1 { '1' } else { '0' })
                            .collect()
                    };
                    Feature::uniform(name, m)
                })
                .collect();
            FeatureScheme::new(spec.num_states(), features, &[])
        }
    }
}

/// Exact optimal cost at the belief under which site `l + 1` independently
/// holds a treasure with probability `probs[l]`.
///
/// Such beliefs stay of product form: a search only changes the searched
/// site's marginal, which can only decrease. A search whose expected gain
/// `p beta v` does not exceed its cost is therefore never worth making, and
/// only finitely many failure counts need to be explored. A site known to
/// hold a treasure (`p = 1`) keeps `p = 1` after a failure; that self-loop is
/// solved in closed form.
pub fn optimal_cost_product(spec: &TreasureSpec, probs: &[f64]) -> Result<f64> {
    spec.validate()?;
    if probs.len() != spec.sites() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument(
            "one probability in [0, 1] per site expected".into(),
        ));
    }
    let mut memo = HashMap::new();
    let mut counts = vec![0u32; spec.sites()];
    Ok(product_value(spec, probs, &mut counts, &mut memo))
}

/// Failure count standing for "treasure found".
const FOUND: u32 = u32::MAX;

fn marginal(p0: f64, beta: f64, count: u32) -> f64 {
    if count == FOUND {
        return 0.0;
    }
    let kept = p0 * (1.0 - beta).powi(count as i32);
    if kept == 0.0 {
        0.0
    } else {
        kept / (kept + 1.0 - p0)
    }
}

fn product_value(
    spec: &TreasureSpec,
    probs: &[f64],
    counts: &mut Vec<u32>,
    memo: &mut HashMap<Vec<u32>, f64>,
) -> f64 {
    if let Some(&v) = memo.get(counts.as_slice()) {
        return v;
    }
    let alpha = spec.discount;
    let mut best = 0.0f64;
    for l in 0..spec.sites() {
        let (v, c, beta) = (spec.values[l], spec.costs[l], spec.detection[l]);
        let p = marginal(probs[l], beta, counts[l]);
        if p * beta * v <= c {
            continue;
        }
        let saved = counts[l];
        counts[l] = FOUND;
        let found = product_value(spec, probs, counts, memo);
        let q = if p == 1.0 {
            counts[l] = saved;
            (c - beta * v + alpha * beta * found) / (1.0 - alpha * (1.0 - beta))
        } else {
            counts[l] = saved + 1;
            let missed = product_value(spec, probs, counts, memo);
            counts[l] = saved;
            c - p * beta * v + alpha * (p * beta * found + (1.0 - p * beta) * missed)
        };
        best = best.min(q);
    }
    memo.insert(counts.clone(), best);
    best
}

/// Presence probabilities of the sites if `b` is of product form (the
/// terminal state counts as "no treasure left"), otherwise `None`.
pub fn product_marginals(spec: &TreasureSpec, b: &Belief) -> Option<Vec<f64>> {
    let n = spec.sites();
    if b.dim() != spec.num_states() {
        return None;
    }
    let mut probs = vec![0.0; n];
    for &(s, w) in b.entries() {
        if s != spec.terminal() {
            for (l, p) in probs.iter_mut().enumerate() {
                if s >> l & 1 == 1 {
                    *p += w;
                }
            }
        }
    }
    for p in probs.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    let product = spec.product_belief(&probs).ok()?;
    let t = b.get(spec.terminal());
    for s in 0..spec.terminal() {
        let actual = b.get(s) + if s == 0 { t } else { 0.0 };
        if (actual - product.get(s)).abs() > 1e-9 {
            return None;
        }
    }
    Some(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        for n in 1..=4 {
            let spec = TreasureSpec::reference(n).unwrap();
            let m = build_treasure(&spec).unwrap();
            assert_eq!(m.num_states(), (1 << n) + 1);
            assert_eq!(m.num_controls(), n + 1);
        }
        assert!(TreasureSpec::reference(11).is_err());
    }

    #[test]
    fn two_site_state_order() {
        let spec = TreasureSpec::reference(2).unwrap();
        assert_eq!(spec.state(&[false, false]), 0);
        assert_eq!(spec.state(&[true, false]), 1);
        assert_eq!(spec.state(&[false, true]), 2);
        assert_eq!(spec.state(&[true, true]), 3);
        assert_eq!(spec.terminal(), 4);
    }

    #[test]
    fn max_value_scheme_for_two_sites() {
        let mut spec = TreasureSpec::reference(2).unwrap();
        assert!(spec.values[0] > spec.values[1]);
        let s = treasure_feature_scheme(&spec, TreasureFeatures::MaxValue).unwrap();
        assert_eq!(s.features()[0].members, vec![0, 4]);
        assert_eq!(s.features()[1].members, vec![1, 3]);
        assert_eq!(s.features()[2].members, vec![2]);
        spec.values = vec![1.0, 1.0];
        let s = treasure_feature_scheme(&spec, TreasureFeatures::MaxValue).unwrap();
        assert_eq!(s.features()[1].members, vec![1, 3]);
    }

    #[test]
    fn grouped_scheme() {
        let spec = TreasureSpec::reference(4).unwrap();
        let s = treasure_feature_scheme(&spec, TreasureFeatures::Grouped(2)).unwrap();
        assert_eq!(s.num_features(), 5);
        assert!(s.validate().is_empty());
        assert!(treasure_feature_scheme(&spec, TreasureFeatures::Grouped(3)).is_err());
        assert_eq!(
            "grouped:2".parse::<TreasureFeatures>().unwrap(),
            TreasureFeatures::Grouped(2)
        );
    }

    #[test]
    fn single_site_optimal_cost_in_closed_form() {
        let spec = TreasureSpec::reference(1).unwrap();
        let (v, c, beta, alpha) = (6.48, 0.55, 0.13, 0.99);
        let exact = (c - beta * v) / (1.0 - alpha * (1.0 - beta));
        assert!((optimal_cost_product(&spec, &[1.0]).unwrap() - exact).abs() < 1e-12);
        assert_eq!(optimal_cost_product(&spec, &[0.6]).unwrap(), 0.0);
        assert!(optimal_cost_product(&spec, &[0.9]).unwrap() < 0.0);
    }

    #[test]
    fn marginals_of_product_beliefs() {
        let spec = TreasureSpec::reference(2).unwrap();
        let b = spec.product_belief(&[0.3, 0.8]).unwrap();
        let p = product_marginals(&spec, &b).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.8).abs() < 1e-12);
        let skewed = Belief::new(5, [(0, 0.5), (3, 0.5)]).unwrap();
        assert!(product_marginals(&spec, &skewed).is_none());
    }

    #[test]
    fn product_belief_normalizes() {
        let spec = TreasureSpec::reference(3).unwrap();
        let b = spec.product_belief(&[0.9, 0.5, 0.2]).unwrap();
        assert!((b.get(7) - 0.09).abs() < 1e-15);
        assert_eq!(b.get(spec.terminal()), 0.0);
    }
}
